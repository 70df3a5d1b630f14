#include "wireguide/cli/figures.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "wireguide/constants.hpp"
#include "wireguide/errors.hpp"

namespace wireguide::cli {
namespace {

double smoothed(const Profile& p, std::size_t i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(i + 1, p.values.size() - 1);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += p.values[k];
    return s / static_cast<double>(hi - lo + 1);
}

}  // namespace

const EnsembleSnapshot& RunResult::guide_end() const {
    const double limit = run.config.guide_time * (1.0 + 1e-12);
    const EnsembleSnapshot* best = nullptr;
    for (const auto& s : snapshots) {
        if (s.time <= limit) best = &s;
    }
    if (best == nullptr) throw ValidationError("run has no snapshot within the guide stage");
    return *best;
}

const EnsembleSnapshot& RunResult::expanded() const {
    if (!(run.config.free_expansion_time > 0.0) || snapshots.empty()) {
        throw ValidationError("run '" + run.config.name + "' has no free-expansion snapshot");
    }
    return snapshots.back();
}

RunResult execute(const NamedRun& run, unsigned threads) {
    run.config.validate();
    RunResult r;
    r.run = run;
    const auto t0 = std::chrono::steady_clock::now();
    r.snapshots = run_sequence(run.config.resolved_mot(), run.config.species, run.config.sequence(),
                               run.config.integrator, RunOptions{threads});
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<bool> guided_mask(const RunResult& r) {
    const auto& snap = r.guide_end();
    const auto opts = r.run.config.loading_options();
    std::vector<bool> mask(snap.size());
    for (std::size_t i = 0; i < snap.size(); ++i) {
        mask[i] = survives(snap.states[i], snap.tags[i], r.run.config.field, opts);
    }
    return mask;
}

RunSummary summarize(const RunResult& r) {
    const RunConfig& cfg = r.run.config;
    RunSummary s;
    s.energy_based = loading_efficiency(r.snapshots, LoadingCriterion::EnergyBased, cfg.field, cfg.guide_time,
                                        cfg.loading_options());
    s.survival_based = loading_efficiency(r.snapshots, LoadingCriterion::SurvivalBased, cfg.field, cfg.guide_time,
                                          cfg.loading_options());
    for (const auto& tag : r.guide_end().tags) {
        switch (tag.kind) {
            case OutcomeKind::HitWire: ++s.hit_wire; break;
            case OutcomeKind::LeftDomain: ++s.left_domain; break;
            default: ++s.guided; break;
        }
        if (tag.spin_flip_flagged) ++s.spin_flip_flagged;
    }
    return s;
}

CcdImage top_image(const RunConfig& cfg, const EnsembleSnapshot& snap, const std::vector<bool>* mask) {
    ImagingGeometry g = ImagingGeometry::top_default();
    g.fov_u = g.fov_v = cfg.analysis.top_fov;
    g.pixel_size = cfg.analysis.pixel_size;
    return render_ccd(snap, cfg.field, g, mask);
}

CcdImage side_image(const RunConfig& cfg, const EnsembleSnapshot& snap, const std::vector<bool>* mask) {
    ImagingGeometry g = ImagingGeometry::side_default();
    g.fov_u = cfg.analysis.side_fov_u;
    g.fov_v = cfg.analysis.side_fov_v;
    g.pixel_size = cfg.analysis.pixel_size;
    return render_ccd(snap, cfg.field, g, mask);
}

Fig3Result analyze_fig3(const RunResult& with_current, const RunResult& without_current) {
    Fig3Result out;
    out.with_current = project_profile(top_image(with_current.run.config, with_current.guide_end()), ImageAxis::U);
    out.without_current =
        project_profile(top_image(without_current.run.config, without_current.guide_end()), ImageAxis::U);
    out.difference = difference_profile(out.with_current, out.without_current);
    out.fit = fit_double_gaussian(out.with_current, 0.0);

    const auto& x = out.difference.coordinates;
    std::size_t centre = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (std::abs(x[i]) < std::abs(x[centre])) centre = i;
    }
    out.peak = smoothed(out.difference, centre);
    out.left_dip = 0.0;
    out.right_dip = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = smoothed(out.difference, i);
        if (i < centre) out.left_dip = std::min(out.left_dip, v);
        if (i > centre) out.right_dip = std::min(out.right_dip, v);
    }
    out.peak_in_dip = out.peak > 0.0 && out.left_dip < 0.0 && out.right_dip < 0.0;
    return out;
}

Fig4Result analyze_fig4(const RunResult& run) {
    const RunConfig& cfg = run.run.config;
    if (cfg.field.side_guide()) throw ValidationError("fig4 analysis needs a Kepler guide");
    const auto& load = run.snapshots.front();
    std::vector<bool> eligible(load.size());
    std::size_t bound = 0;
    for (std::size_t i = 0; i < load.size(); ++i) {
        eligible[i] = load.states[i].species.seeker == Seeker::HighField && !load.tags[i].lost() &&
                      cfg.field.wire.current != 0.0 && kepler_bound(load.states[i], cfg.field.wire);
        if (eligible[i]) ++bound;
    }
    const MotParams mot = cfg.resolved_mot();
    Fig4Result out;
    out.model.fraction0 = static_cast<double>(bound) / static_cast<double>(std::max<std::size_t>(load.size(), 1));
    out.model.cloud_center = cfg.field.wire.axis.dot(mot.center_offset);
    out.model.fov_center = 0.0;
    out.model.sigma_x = mot.position_sigma();
    out.model.sigma_v = thermal_velocity_sigma(mot.temperature, cfg.species.mass);
    out.model.fov_length = cfg.analysis.detection_fov_length;
    out.model.axial_acceleration = cfg.field.gravity_acceleration().dot(cfg.field.wire.axis);

    std::vector<EnsembleSnapshot> guide;
    for (const auto& s : run.snapshots) {
        if (s.time <= cfg.guide_time * (1.0 + 1e-12)) guide.push_back(s);
    }
    out.points = detected_fraction(guide, cfg.field, eligible, out.model);
    out.monotone = out.points.size() >= 2 && out.points.back().fraction < out.points.front().fraction;
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        const auto& p = out.points[i];
        if (i > 0 && p.fraction > out.points[i - 1].fraction) out.monotone = false;
        const double se = std::max(p.standard_error, 1.0 / static_cast<double>(std::max<std::size_t>(load.size(), 1)));
        out.max_abs_z = std::max(out.max_abs_z, std::abs(p.fraction - p.model) / se);
    }
    return out;
}

Fig5Result analyze_fig5(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw ValidationError("fig5 analysis needs at least one run");
    Fig5Result out;
    const double bias = runs.front().run.config.field.bias.magnitude;
    std::vector<CurrentPosition> pts;
    for (const auto& r : runs) {
        const RunConfig& cfg = r.run.config;
        if (!cfg.field.side_guide()) throw ValidationError("fig5 analysis needs side-guide runs");
        if (cfg.field.bias.magnitude != bias) throw ValidationError("fig5 runs must share one bias field");
        const SideTrap trap = side_trap_center(cfg.field.wire, cfg.field.bias);
        const auto mask = guided_mask(r);
        const auto& snap = r.guide_end();
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < snap.size(); ++i) {
            if (!mask[i]) continue;
            const double d = perpendicular_offset(snap.states[i].position, cfg.field.wire).dot(trap.direction);
            sum += d;
            sum2 += d * d;
            ++n;
        }
        Fig5Point p;
        p.current = cfg.field.wire.current;
        p.predicted = trap.distance;
        p.guided = n;
        if (n > 0) {
            p.centroid = sum / static_cast<double>(n);
            const double var = std::max(0.0, sum2 / static_cast<double>(n) - p.centroid * p.centroid);
            p.standard_error = std::sqrt(var / static_cast<double>(n));
        }
        out.points.push_back(p);
        pts.push_back({std::abs(p.current), p.centroid});
    }
    out.fit = fit_rs_vs_current(pts);
    out.expected_slope = constants::mu0_over_2pi / bias;
    out.slope_ratio = out.fit.slope / out.expected_slope;
    return out;
}

Fig6Entry analyze_fig6(const RunResult& run) {
    const RunConfig& cfg = run.run.config;
    Fig6Entry e;
    e.variant = run.run.variant;
    e.side_guide = cfg.field.side_guide();
    const auto mask = guided_mask(run);
    e.guided = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    e.image = top_image(cfg, run.expanded(), &mask);
    if (e.image.total() == 0) throw ValidationError("no guided atoms inside the fig6 field of view");
    e.cut = central_cut(e.image, ImageAxis::U, cfg.analysis.cut_half_width);
    e.ring = ring_statistic(e.cut);
    return e;
}

}  // namespace wireguide::cli
