#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wireguide/ensemble.hpp"
#include "wireguide/imaging.hpp"

namespace wireguide::cli {

/// Provenance stamped into every output file.
struct FileMeta {
    std::string run;
    std::uint64_t master_seed = 0;
};

/// Shortest decimal that parses back to the same double.
std::string exact_number(double v);

/// `# wireguide <version> master_seed=<seed> run=<run>` plus optional extra fields.
std::string provenance_line(const FileMeta& meta, const std::string& extra = {});

/// Snapshot CSV: a provenance comment line carrying time_s, then the header
/// atom_id,x_m,y_m,z_m,vx_m_s,vy_m_s,vz_m_s,seeker,outcome,spin_flip_flagged,exit_time_s
void write_snapshot_csv(const std::filesystem::path& path, const EnsembleSnapshot& snap, const FileMeta& meta);

/// Reads a snapshot written by write_snapshot_csv. Mass and mu_eff come from `base`.
EnsembleSnapshot read_snapshot_csv(const std::filesystem::path& path, const AtomSpecies& base);

void write_profiles_csv(const std::filesystem::path& path, const FileMeta& meta,
                        const std::vector<std::string>& columns,
                        const std::vector<std::vector<double>>& data);

void write_pgm_file(const std::filesystem::path& path, const CcdImage& image, const FileMeta& meta);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace wireguide::cli
