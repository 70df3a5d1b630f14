#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "wireguide/dynamics.hpp"
#include "wireguide/field.hpp"

namespace wireguide {

struct SeekerFractions {
    double high_field = 0.5;
    double low_field = 0.5;
};

/// End state of the MOT shift stage: an isotropic Gaussian cloud at temperature T.
struct MotParams {
    Vec3 center_offset = Vec3(0.0, -1.0e-3, 0.0);   // m, from the wire axis point
    double fwhm = 1.6e-3;                           // m
    double temperature = 200.0e-6;                  // K
    std::size_t atom_count = 10000;
    SeekerFractions seeker_fractions;

    double position_sigma() const;
    void validate() const;
};

/// Per-axis thermal velocity spread sqrt(kB T / m).
double thermal_velocity_sigma(double temperature, double mass);

struct SequenceSpec {
    FieldConfig guide;
    double guide_time = 20.0e-3;
    std::vector<double> snapshot_times{0.0, 20.0e-3};
    double free_expansion_time = 0.0;
    std::uint64_t master_seed = 1;

    void validate() const;
};

struct EnsembleSnapshot {
    double time = 0.0;
    std::vector<AtomState> states;
    std::vector<Outcome> tags;

    std::size_t size() const { return states.size(); }
};

/// splitmix64 finalizer.
inline std::uint64_t scramble_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the private random stream of atom `index`. The master seed is
/// scrambled first: with a raw XOR, small master seeds would only permute the
/// same set of streams.
inline std::uint64_t atom_seed(std::uint64_t master_seed, std::size_t index) {
    return scramble_seed(master_seed) ^ static_cast<std::uint64_t>(index);
}

/// Draws one atom from the MOT distribution using its own stream.
AtomState sample_atom(const MotParams& params, const AtomSpecies& base, std::uint64_t seed,
                      const Vec3& origin = Vec3::Zero());

/// Samples params.atom_count atoms; atom i uses atom_seed(master_seed, i).
/// `base` supplies mass and mu_eff, the seeker is drawn from the fractions.
std::vector<AtomState> sample_mot(const MotParams& params, const AtomSpecies& base,
                                  std::uint64_t master_seed, const Vec3& origin = Vec3::Zero());

struct RunOptions {
    unsigned threads = 1;
};

/// Runs the load / guide / (optional) ballistic sequence for every atom.
///
/// One snapshot per requested time; when free_expansion_time > 0 a final
/// snapshot taken free_expansion_time after guide_time, with all fields off, is
/// appended. Atoms that left the domain keep flying ballistically, atoms that
/// hit the wire stay where they hit it. Results do not depend on the thread
/// count. Throws NumericalError (message carries the atom index) on blow-up.
std::vector<EnsembleSnapshot> run_sequence(const MotParams& params, const AtomSpecies& base,
                                           const SequenceSpec& spec, const IntegratorConfig& icfg,
                                           const RunOptions& options = {});

/// Free flight of every atom for `t` seconds under `gravity` (m/s^2).
/// Atoms that hit the wire are left in place.
EnsembleSnapshot ballistic_expand(const EnsembleSnapshot& snapshot, double t,
                                  const Vec3& gravity = Vec3::Zero());

enum class LoadingCriterion { EnergyBased, SurvivalBased };

struct LoadingOptions {
    double capture_radius = 5.0e-3;      // m, transverse, around the guide center
    bool spin_flip_counts_as_loss = false;
};

struct Efficiency {
    double fraction = 0.0;
    double standard_error = 0.0;
    std::size_t selected = 0;
    std::size_t total = 0;
};

/// Bound test for a high-field seeker in the Kepler potential: E < 0 and a
/// perihelion outside the wire, using the transverse motion only.
bool kepler_bound(const AtomState& s, const WireSpec& wire);

/// Perihelion of the transverse Kepler orbit (0 when L = 0).
double kepler_perihelion(const AtomState& s, const WireSpec& wire);

/// Transverse position of the guide: the wire axis (Kepler) or the zero line (side guide).
Vec3 guide_center(const FieldConfig& cfg);

/// Survival test used by the survival criterion: matching seeker, not lost,
/// within the capture radius of the guide center.
bool survives(const AtomState& s, const Outcome& tag, const FieldConfig& cfg,
              const LoadingOptions& options);

/// Fraction of launched atoms loaded into the guide.
///
/// EnergyBased uses the first snapshot (load time) and applies to the Kepler
/// guide only; std::nullopt is returned for a side guide. SurvivalBased uses
/// the last snapshot whose time does not exceed `guide_time`.
/// Throws ValidationError for an empty ensemble.
std::optional<Efficiency> loading_efficiency(const std::vector<EnsembleSnapshot>& snapshots,
                                             LoadingCriterion criterion, const FieldConfig& cfg,
                                             double guide_time, const LoadingOptions& options = {});

}  // namespace wireguide
