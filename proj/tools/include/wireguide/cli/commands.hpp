#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wireguide/cli/figures.hpp"
#include "wireguide/cli/run_config.hpp"

namespace wireguide::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,
    kExitDegraded = 3,
    kExitNumerical = 4,
};

struct GlobalOptions {
    std::string config;                    // path to a config file
    std::string preset;                    // name of a shipped preset
    std::optional<std::uint64_t> seed;     // overrides run.master_seed
    unsigned threads = 0;                  // 0: hardware concurrency
    std::filesystem::path out = "wireguide-out";
};

/// Runs described by --config or --preset (exactly one), seed override applied.
std::vector<NamedRun> resolve_runs(const GlobalOptions& g);

/// Directory of a run below the output root.
std::filesystem::path run_directory(const std::filesystem::path& root, const NamedRun& run);

struct FieldGridOptions {
    double half_width = 2.0e-3;   // m
    std::size_t points = 81;      // per axis
};
int cmd_field(const GlobalOptions& g, const FieldGridOptions& grid, std::ostream& log);

struct TrapOptions {
    std::optional<double> current;   // A
    std::optional<double> bias;      // T
    std::filesystem::path json;      // empty: <out>/trap.json
};
int cmd_trap(const GlobalOptions& g, const TrapOptions& opts, std::ostream& log);

/// Writes one snapshot CSV per snapshot plus summary.json and config.cfg per run.
int cmd_simulate(const GlobalOptions& g, std::ostream& log);

/// Re-reads the snapshots written by cmd_simulate from `input` (default: --out)
/// and runs the configured analysis into <out>/analysis.
int cmd_analyze(const GlobalOptions& g, const std::filesystem::path& input, std::ostream& log);

struct ExpandOptions {
    std::filesystem::path snapshot;
    double time = 0.0;                // s
    std::filesystem::path output;     // empty: <out>/expanded.csv
};
int cmd_expand(const GlobalOptions& g, const ExpandOptions& opts, std::ostream& log);

/// Loads the snapshots of one run previously written by cmd_simulate.
RunResult load_run_result(const NamedRun& run, const std::filesystem::path& root);

/// Full command-line entry point; maps errors to exit codes.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace wireguide::cli
