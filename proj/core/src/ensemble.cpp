#include "wireguide/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "wireguide/errors.hpp"

namespace wireguide {
namespace {

std::mt19937_64 make_engine(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return std::mt19937_64(seq);
}

// Free flight from `s` to time t; velocity picks up gravity.
AtomState fly(const AtomState& s, double t, const Vec3& gravity) {
    const double dt = t - s.time;
    AtomState out = s;
    out.position = s.position + dt * s.velocity + 0.5 * dt * dt * gravity;
    out.velocity = s.velocity + dt * gravity;
    out.time = t;
    return out;
}

AtomState state_at(const Propagator& prop, double t, const Vec3& gravity) {
    const AtomState& s = prop.state();
    if (prop.outcome().kind == OutcomeKind::LeftDomain) return fly(s, t, gravity);
    AtomState out = s;
    out.time = t;
    return out;
}

template <typename Work>
void parallel_for(std::size_t n, unsigned threads, Work&& work) {
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) work(i);
        });
    }
}

}  // namespace

double MotParams::position_sigma() const {
    return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

void MotParams::validate() const {
    if (!center_offset.allFinite()) throw ValidationError("MOT offset must be finite");
    if (!(fwhm > 0.0)) throw ValidationError("MOT fwhm must be > 0");
    if (!(temperature > 0.0)) throw ValidationError("MOT temperature must be > 0");
    if (atom_count == 0) throw ValidationError("atom count must be >= 1");
    const auto& w = seeker_fractions;
    if (!(w.high_field >= 0.0) || !(w.low_field >= 0.0) ||
        std::abs(w.high_field + w.low_field - 1.0) > 1e-12) {
        throw ValidationError("seeker fractions must be >= 0 and sum to 1");
    }
}

double thermal_velocity_sigma(double temperature, double mass) {
    return std::sqrt(constants::boltzmann * temperature / mass);
}

void SequenceSpec::validate() const {
    guide.validate();
    if (!(guide_time >= 0.0)) throw ValidationError("guide time must be >= 0");
    if (!(free_expansion_time >= 0.0)) throw ValidationError("free expansion time must be >= 0");
    if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
        throw ValidationError("snapshot times must be sorted");
    }
    for (double t : snapshot_times) {
        if (!(t >= 0.0) || t > guide_time) {
            throw ValidationError("snapshot times must lie in [0, guide_time]");
        }
    }
}

AtomState sample_atom(const MotParams& params, const AtomSpecies& base, std::uint64_t seed,
                      const Vec3& origin) {
    auto engine = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const double sx = params.position_sigma();
    const double sv = thermal_velocity_sigma(params.temperature, base.mass);

    AtomState s;
    s.species = base;
    for (int k = 0; k < 3; ++k) s.position[k] = sx * normal(engine);
    for (int k = 0; k < 3; ++k) s.velocity[k] = sv * normal(engine);
    s.position += origin + params.center_offset;
    s.species.seeker = uniform(engine) < params.seeker_fractions.high_field ? Seeker::HighField
                                                                            : Seeker::LowField;
    s.time = 0.0;
    return s;
}

std::vector<AtomState> sample_mot(const MotParams& params, const AtomSpecies& base,
                                  std::uint64_t master_seed, const Vec3& origin) {
    params.validate();
    base.validate();
    std::vector<AtomState> atoms(params.atom_count);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        atoms[i] = sample_atom(params, base, atom_seed(master_seed, i), origin);
    }
    return atoms;
}

std::vector<EnsembleSnapshot> run_sequence(const MotParams& params, const AtomSpecies& base,
                                           const SequenceSpec& spec, const IntegratorConfig& icfg,
                                           const RunOptions& options) {
    params.validate();
    base.validate();
    spec.validate();
    icfg.validate(spec.guide.wire);

    const std::size_t n = params.atom_count;
    const bool expand = spec.free_expansion_time > 0.0;
    const std::size_t n_snap = spec.snapshot_times.size() + (expand ? 1 : 0);
    const Vec3 gravity = spec.guide.gravity_acceleration();

    std::vector<EnsembleSnapshot> snaps(n_snap);
    for (std::size_t k = 0; k < spec.snapshot_times.size(); ++k) snaps[k].time = spec.snapshot_times[k];
    if (expand) snaps.back().time = spec.guide_time + spec.free_expansion_time;
    for (auto& s : snaps) {
        s.states.resize(n);
        s.tags.resize(n);
    }

    std::vector<std::string> errors(n);
    parallel_for(n, options.threads, [&](std::size_t i) {
        try {
            const AtomState initial =
                sample_atom(params, base, atom_seed(spec.master_seed, i), spec.guide.wire.axis_point);
            Propagator prop(initial, spec.guide, icfg);
            for (std::size_t k = 0; k < spec.snapshot_times.size(); ++k) {
                const double t = spec.snapshot_times[k];
                prop.advance_to(t);
                snaps[k].states[i] = state_at(prop, t, gravity);
                snaps[k].tags[i] = prop.outcome();
            }
            if (expand) {
                prop.advance_to(spec.guide_time);
                const AtomState at_release = state_at(prop, spec.guide_time, gravity);
                const double t_end = snaps.back().time;
                AtomState released = at_release;
                released.time = t_end;
                snaps.back().states[i] = prop.outcome().kind == OutcomeKind::HitWire
                                             ? released
                                             : fly(at_release, t_end, gravity);
                snaps.back().tags[i] = prop.outcome();
            }
        } catch (const NumericalError& e) {
            errors[i] = e.what();
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) {
            throw NumericalError("atom " + std::to_string(i) + ": " + errors[i], 0.0);
        }
    }
    return snaps;
}

EnsembleSnapshot ballistic_expand(const EnsembleSnapshot& snapshot, double t, const Vec3& gravity) {
    if (!(t >= 0.0)) throw ValidationError("expansion time must be >= 0");
    EnsembleSnapshot out = snapshot;
    out.time = snapshot.time + t;
    for (std::size_t i = 0; i < out.states.size(); ++i) {
        AtomState& s = out.states[i];
        if (out.tags[i].kind == OutcomeKind::HitWire) {
            s.time = out.time;
            continue;
        }
        s = fly(s, out.time, gravity);
    }
    return out;
}

double kepler_perihelion(const AtomState& s, const WireSpec& wire) {
    const Vec3 rho = perpendicular_offset(s.position, wire);
    const Vec3 v_perp = s.velocity - s.velocity.dot(wire.axis) * wire.axis;
    const double m = s.species.mass;
    const double k = constants::mu0_over_2pi * s.species.mu_eff * std::abs(wire.current);
    const double energy = 0.5 * m * v_perp.squaredNorm() - k / rho.norm();
    const double l = m * wire.axis.dot(rho.cross(v_perp));
    if (l == 0.0) return 0.0;
    // Smaller root of E r^2 + k r - L^2 / 2m = 0 in a cancellation-free form.
    const double disc = std::max(0.0, k * k + 2.0 * energy * l * l / m);
    return l * l / (m * (k + std::sqrt(disc)));
}

bool kepler_bound(const AtomState& s, const WireSpec& wire) {
    if (s.species.seeker != Seeker::HighField || wire.current == 0.0 || s.species.mu_eff == 0.0) {
        return false;
    }
    const Vec3 rho = perpendicular_offset(s.position, wire);
    const Vec3 v_perp = s.velocity - s.velocity.dot(wire.axis) * wire.axis;
    const double k = constants::mu0_over_2pi * s.species.mu_eff * std::abs(wire.current);
    const double energy = 0.5 * s.species.mass * v_perp.squaredNorm() - k / rho.norm();
    return energy < 0.0 && kepler_perihelion(s, wire) > wire.radius;
}

Vec3 guide_center(const FieldConfig& cfg) {
    if (cfg.side_guide()) return side_trap_center(cfg.wire, cfg.bias).center;
    return cfg.wire.axis_point;
}

bool survives(const AtomState& s, const Outcome& tag, const FieldConfig& cfg,
              const LoadingOptions& options) {
    const Seeker wanted = cfg.side_guide() ? Seeker::LowField : Seeker::HighField;
    if (s.species.seeker != wanted || tag.lost()) return false;
    if (options.spin_flip_counts_as_loss && tag.spin_flip_flagged) return false;
    if (cfg.wire.current == 0.0) return false;
    const Vec3 d = s.position - guide_center(cfg);
    const Vec3 transverse = d - d.dot(cfg.wire.axis) * cfg.wire.axis;
    return transverse.norm() < options.capture_radius;
}

std::optional<Efficiency> loading_efficiency(const std::vector<EnsembleSnapshot>& snapshots,
                                             LoadingCriterion criterion, const FieldConfig& cfg,
                                             double guide_time, const LoadingOptions& options) {
    if (snapshots.empty() || snapshots.front().states.empty()) {
        throw ValidationError("loading efficiency of an empty ensemble");
    }
    Efficiency eff;
    eff.total = snapshots.front().size();

    if (criterion == LoadingCriterion::EnergyBased) {
        if (cfg.side_guide()) return std::nullopt;
        for (const auto& s : snapshots.front().states) eff.selected += kepler_bound(s, cfg.wire) ? 1 : 0;
    } else {
        const EnsembleSnapshot* last = nullptr;
        for (const auto& snap : snapshots) {
            if (snap.time <= guide_time * (1.0 + 1e-12)) last = &snap;
        }
        if (last == nullptr) throw ValidationError("no snapshot at or before the guide time");
        for (std::size_t i = 0; i < last->size(); ++i) {
            eff.selected += survives(last->states[i], last->tags[i], cfg, options) ? 1 : 0;
        }
    }
    const double n = static_cast<double>(eff.total);
    eff.fraction = static_cast<double>(eff.selected) / n;
    eff.standard_error = std::sqrt(eff.fraction * (1.0 - eff.fraction) / n);
    return eff;
}

}  // namespace wireguide
