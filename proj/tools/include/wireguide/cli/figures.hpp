#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wireguide/cli/run_config.hpp"
#include "wireguide/ensemble.hpp"
#include "wireguide/imaging.hpp"

namespace wireguide::cli {

/// One executed run: its configuration and every snapshot it produced.
struct RunResult {
    NamedRun run;
    std::vector<EnsembleSnapshot> snapshots;
    double wall_seconds = 0.0;

    /// Last snapshot taken at or before the end of the guide stage.
    const EnsembleSnapshot& guide_end() const;
    /// Snapshot after free expansion. Throws when the run has none.
    const EnsembleSnapshot& expanded() const;
};

RunResult execute(const NamedRun& run, unsigned threads);

/// Survivors at the end of the guide stage (survival criterion of the run).
std::vector<bool> guided_mask(const RunResult& r);

struct RunSummary {
    std::optional<Efficiency> energy_based;
    std::optional<Efficiency> survival_based;
    std::size_t guided = 0, hit_wire = 0, left_domain = 0, spin_flip_flagged = 0;
};
RunSummary summarize(const RunResult& r);

struct Fig3Result {
    Profile with_current;
    Profile without_current;
    Profile difference;
    DoubleGaussianFit fit;            // on the profile with current
    double peak = 0.0;                // difference at the wire, 3-bin average
    double left_dip = 0.0;            // most negative difference left of the peak
    double right_dip = 0.0;
    bool peak_in_dip = false;         // peak > 0 and both dips < 0
};
/// Top-view projections perpendicular to the wire at the guide-end snapshot.
Fig3Result analyze_fig3(const RunResult& with_current, const RunResult& without_current);

struct Fig4Result {
    std::vector<DetectionPoint> points;
    AxialExpansionModel model;
    bool monotone = false;            // non-increasing and strictly lower at the end
    double max_abs_z = 0.0;           // max |sim - model| / standard error
};
/// Atoms energy-bound at load, detected while not lost and inside the
/// illuminated section of the wire.
Fig4Result analyze_fig4(const RunResult& run);

struct Fig5Point {
    double current = 0.0;
    double predicted = 0.0;           // analytic r_s
    double centroid = 0.0;            // mean distance of guided atoms along the trap direction
    double standard_error = 0.0;
    std::size_t guided = 0;
};
struct Fig5Result {
    std::vector<Fig5Point> points;
    LineFit fit;
    double expected_slope = 0.0;      // mu0 / (2 pi B_b)
    double slope_ratio = 0.0;
};
/// All runs must be side guides sharing one bias field.
Fig5Result analyze_fig5(const std::vector<RunResult>& runs);

struct Fig6Entry {
    std::string variant;
    bool side_guide = false;
    std::size_t guided = 0;
    CcdImage image;
    Profile cut;
    RingStatistic ring;
};
/// Top view of the guided atoms after free expansion, central cut across it.
Fig6Entry analyze_fig6(const RunResult& run);

/// Top and side images of a snapshot using the run's analysis geometry.
CcdImage top_image(const RunConfig& cfg, const EnsembleSnapshot& snap, const std::vector<bool>* mask = nullptr);
CcdImage side_image(const RunConfig& cfg, const EnsembleSnapshot& snap, const std::vector<bool>* mask = nullptr);

}  // namespace wireguide::cli
