#include "wireguide/dynamics.hpp"

#include <cmath>
#include <string>

#include "wireguide/errors.hpp"

namespace wireguide {

std::string_view to_string(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::Guided: return "guided";
        case OutcomeKind::HitWire: return "hit_wire";
        case OutcomeKind::LeftDomain: return "left_domain";
        case OutcomeKind::SpinFlipFlagged: return "spin_flip_flagged";
    }
    return "unknown";
}

OutcomeKind outcome_kind_from_string(std::string_view name) {
    for (auto k : {OutcomeKind::Guided, OutcomeKind::HitWire, OutcomeKind::LeftDomain,
                   OutcomeKind::SpinFlipFlagged}) {
        if (to_string(k) == name) return k;
    }
    throw ValidationError("unknown outcome '" + std::string(name) + "'");
}

void IntegratorConfig::validate(const WireSpec& wire) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("integrator dt must be > 0");
    if (!(max_time >= 0.0)) throw ValidationError("integrator max_time must be >= 0");
    if (!(domain_radius > wire.radius)) throw ValidationError("domain radius must exceed the wire radius");
    if (!(adiabaticity_threshold > 0.0)) throw ValidationError("adiabaticity threshold must be > 0");
    if (sample_stride == 0) throw ValidationError("sample stride must be >= 1");
}

double total_energy(const AtomState& s, const FieldConfig& cfg) {
    return 0.5 * s.species.mass * s.velocity.squaredNorm() + potential(s.position, s.species, cfg);
}

double axial_angular_momentum(const AtomState& s, const WireSpec& wire) {
    const Vec3 rho = perpendicular_offset(s.position, wire);
    return s.species.mass * wire.axis.dot(rho.cross(s.velocity));
}

AtomState step(const AtomState& s, const FieldConfig& cfg, double dt) {
    const double inv_m = 1.0 / s.species.mass;
    return verlet_step(
        s, [&](const Vec3& p) -> Vec3 { return inv_m * force(p, s.species, cfg); }, dt);
}

double adiabaticity(const FieldSample& sample, const Vec3& velocity, const AtomSpecies& atom) {
    const double bmag = sample.b.norm();
    if (bmag == 0.0) return std::numeric_limits<double>::infinity();
    const Vec3 bhat = sample.b / bmag;
    // d(B_hat)/dt = (1 - B_hat B_hat^T) (J v) / |B|
    const Vec3 db = sample.jacobian * velocity;
    const double omega_b = (db - bhat.dot(db) * bhat).norm() / bmag;
    if (omega_b == 0.0) return 0.0;
    const double omega_l = atom.mu_eff * bmag / constants::hbar;
    if (omega_l == 0.0) return std::numeric_limits<double>::infinity();
    return omega_b / omega_l;
}

double adiabaticity(const AtomState& s, const FieldConfig& cfg) {
    return adiabaticity(total_field_sample(s.position, cfg), s.velocity, s.species);
}

double circular_orbit_speed(double r, const AtomSpecies& atom, const WireSpec& wire) {
    if (atom.seeker != Seeker::HighField) {
        throw ValidationError("circular orbits exist only for high-field seekers");
    }
    if (!(r > wire.radius)) throw ValidationError("orbit radius must exceed the wire radius");
    const double k = constants::mu0_over_2pi * atom.mu_eff * std::abs(wire.current);
    return std::sqrt(k / (atom.mass * r));
}

Propagator::Propagator(const AtomState& initial, const FieldConfig& cfg,
                       const IntegratorConfig& icfg)
    : cfg_(cfg), icfg_(icfg), state_(initial) {
    if (!initial.position.allFinite() || !initial.velocity.allFinite() || !(initial.time >= 0.0)) {
        throw ValidationError("initial atom state must be finite with time >= 0");
    }
    sample_ = total_field_sample(state_.position, cfg_);
    accel_ = force_from_sample(sample_, state_.species, cfg_) / state_.species.mass;
    outcome_.exit_time = state_.time;
    if (adiabaticity(sample_, state_.velocity, state_.species) > icfg_.adiabaticity_threshold) {
        outcome_.spin_flip_flagged = true;
        outcome_.flag_time = state_.time;
        outcome_.kind = OutcomeKind::SpinFlipFlagged;
    }
    if (icfg_.wire_collision_on && perpendicular_distance(state_.position, cfg_.wire) <= cfg_.wire.radius) {
        // Released inside the conductor: absorbed immediately.
        outcome_.kind = OutcomeKind::HitWire;
    }
}

bool Propagator::single_step(double h, double t_new) {
    const AtomState previous = state_;
    const double inv_m = 1.0 / state_.species.mass;

    state_.velocity += 0.5 * h * accel_;
    state_.position += h * state_.velocity;
    sample_ = total_field_sample(state_.position, cfg_);
    accel_ = inv_m * force_from_sample(sample_, state_.species, cfg_);
    state_.velocity += 0.5 * h * accel_;
    state_.time = t_new;

    if (!state_.position.allFinite() || !state_.velocity.allFinite()) {
        state_ = previous;
        throw NumericalError("trajectory became non-finite after t = " +
                                 std::to_string(previous.time) + " s",
                             previous.time);
    }

    if (!outcome_.spin_flip_flagged &&
        adiabaticity(sample_, state_.velocity, state_.species) > icfg_.adiabaticity_threshold) {
        outcome_.spin_flip_flagged = true;
        outcome_.flag_time = t_new;
        outcome_.kind = OutcomeKind::SpinFlipFlagged;
    }

    const double r = perpendicular_distance(state_.position, cfg_.wire);
    if (icfg_.wire_collision_on && r <= cfg_.wire.radius) {
        outcome_.kind = OutcomeKind::HitWire;
        return false;
    }
    if (r >= icfg_.domain_radius) {
        outcome_.kind = OutcomeKind::LeftDomain;
        return false;
    }
    return true;
}

Trajectory integrate(const AtomState& initial, const FieldConfig& cfg, const IntegratorConfig& icfg) {
    cfg.validate();
    icfg.validate(cfg.wire);
    initial.species.validate();
    if (perpendicular_distance(initial.position, cfg.wire) <= cfg.wire.radius) {
        throw ValidationError("initial atom position lies inside the wire");
    }

    Propagator prop(initial, cfg, icfg);
    Trajectory traj;
    auto record = [&](const AtomState& s) {
        traj.samples.push_back(s);
        traj.energy.push_back(total_energy(s, cfg));
        traj.angular_momentum.push_back(axial_angular_momentum(s, cfg.wire));
    };
    record(prop.state());

    std::size_t count = 0;
    const double end = initial.time + icfg.max_time;
    prop.advance_to(end, [&](const AtomState& s, const FieldSample&) {
        ++count;
        const bool final_step = s.time >= end || prop.terminated();
        if (count % icfg.sample_stride == 0 || final_step) record(s);
    });
    // advance_to reports termination only after the observer ran; make sure the
    // terminal state is the last sample.
    if (traj.samples.back().time != prop.state().time) record(prop.state());
    traj.outcome = prop.outcome();
    return traj;
}

}  // namespace wireguide
