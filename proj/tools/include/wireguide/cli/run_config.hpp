#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wireguide/dynamics.hpp"
#include "wireguide/ensemble.hpp"
#include "wireguide/field.hpp"
#include "wireguide/imaging.hpp"

namespace wireguide::cli {

struct AnalysisOptions {
    std::string kind = "none";                 // none | images | fig3 | fig4 | fig5 | fig6
    double kepler_capture_radius = 5.0e-3;     // m
    double side_capture_radius = 1.0e-3;       // m
    bool spin_flip_counts_as_loss = false;
    double pixel_size = 50.0e-6;               // m
    double top_fov = 1.0e-2;                   // m, square
    double side_fov_u = 2.0e-2;                // m, along the wire
    double side_fov_v = 1.0e-2;                // m
    double detection_fov_length = 2.0e-2;      // m
    std::size_t cut_half_width = 2;            // pixels either side of the central line
    bool poisson_noise = false;
};

/// Complete declarative description of one run.
struct RunConfig {
    std::string name = "run";
    std::uint64_t master_seed = 1;
    FieldConfig field;
    AtomSpecies species;
    MotParams mot;
    bool mot_on_trap = false;            // place the cloud on the side-trap line
    double guide_time = 20.0e-3;
    std::vector<double> snapshot_times{0.0, 20.0e-3};
    double free_expansion_time = 0.0;
    IntegratorConfig integrator;
    AnalysisOptions analysis;

    /// Sequence spec with the MOT offset resolved.
    SequenceSpec sequence() const;
    MotParams resolved_mot() const;
    LoadingOptions loading_options() const;

    /// Checks every module invariant. Throws ValidationError.
    void validate() const;
};

/// Flat `section.key -> value` view of a configuration. Values are canonical
/// strings: shortest round-trip decimal numbers, comma-separated vectors.
using KeyValues = std::map<std::string, std::string>;

KeyValues to_key_values(const RunConfig& cfg);

/// Applies `kv` on top of `base`; unknown keys throw ValidationError.
RunConfig apply_key_values(RunConfig base, const KeyValues& kv);

/// Canonical text form: one `[section]` block per section, keys sorted.
std::string to_text(const RunConfig& cfg);

/// A configuration file: base keys plus optional named variants, each a set of
/// overrides. A file without `[variant ...]` sections describes a single run.
struct ConfigFile {
    KeyValues base;
    std::vector<std::pair<std::string, KeyValues>> variants;
};

ConfigFile parse_config_text(std::string_view text);

struct NamedRun {
    std::string variant;   // empty when the file has no variants
    RunConfig config;
};

/// Expands a config file into validated runs.
std::vector<NamedRun> load_runs(const ConfigFile& file);

std::string format_number(double v);
std::string all_keys_help();

}  // namespace wireguide::cli
