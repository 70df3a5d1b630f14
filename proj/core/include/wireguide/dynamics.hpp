#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include "wireguide/field.hpp"

namespace wireguide {

struct AtomState {
    AtomSpecies species;
    Vec3 position = Vec3::Zero();   // m
    Vec3 velocity = Vec3::Zero();   // m/s
    double time = 0.0;              // s
};

struct IntegratorConfig {
    double dt = 1.0e-6;
    double max_time = 20.0e-3;
    bool wire_collision_on = true;
    double domain_radius = 0.02;
    double adiabaticity_threshold = 0.1;
    std::size_t sample_stride = 100;

    void validate(const WireSpec& wire) const;
};

enum class OutcomeKind { Guided, HitWire, LeftDomain, SpinFlipFlagged };

std::string_view to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(std::string_view name);

/// Terminal classification of a trajectory.
///
/// `kind` is HitWire or LeftDomain when that event fired (exit_time is the
/// event time). Otherwise the atom is still in the guide at `exit_time` and the
/// kind is SpinFlipFlagged if the adiabaticity flag latched on the way, Guided
/// if it did not. The flag is kept separately so that it survives a later
/// terminal event.
struct Outcome {
    OutcomeKind kind = OutcomeKind::Guided;
    double exit_time = 0.0;
    bool spin_flip_flagged = false;
    double flag_time = std::numeric_limits<double>::infinity();

    bool lost() const { return kind == OutcomeKind::HitWire || kind == OutcomeKind::LeftDomain; }
};

struct Trajectory {
    std::vector<AtomState> samples;
    std::vector<double> energy;              // J, kinetic + potential
    std::vector<double> angular_momentum;    // kg m^2 / s about the wire axis
    Outcome outcome;
};

/// Kinetic plus adiabatic potential energy.
double total_energy(const AtomState& s, const FieldConfig& cfg);

/// m n . (rho x v) about the wire axis.
double axial_angular_momentum(const AtomState& s, const WireSpec& wire);

/// One velocity-Verlet step for an arbitrary acceleration a(position).
template <typename Accel>
AtomState verlet_step(const AtomState& s, Accel&& accel, double dt) {
    AtomState out = s;
    const Vec3 half_kick = 0.5 * dt * accel(s.position);
    out.position = s.position + dt * (s.velocity + half_kick);
    out.velocity = s.velocity + half_kick + 0.5 * dt * accel(out.position);
    out.time = s.time + dt;
    return out;
}

/// Velocity-Verlet step in the guide potential.
AtomState step(const AtomState& s, const FieldConfig& cfg, double dt);

/// omega_B / omega_L. Infinity at an exact field zero.
double adiabaticity(const AtomState& s, const FieldConfig& cfg);
double adiabaticity(const FieldSample& sample, const Vec3& velocity, const AtomSpecies& atom);

/// Speed of a circular orbit of radius r around the wire (high-field seekers).
double circular_orbit_speed(double r, const AtomSpecies& atom, const WireSpec& wire);

/// Incremental integrator that owns one atom.
///
/// Events (wire hit, leaving the domain, adiabaticity) are checked after every
/// step. Once a terminal event fires the propagator stops moving the atom. An
/// atom that starts inside the wire is absorbed at once.
class Propagator {
  public:
    Propagator(const AtomState& initial, const FieldConfig& cfg, const IntegratorConfig& icfg);

    /// Advances to exactly `t` (or until an event). Steps of icfg.dt are used,
    /// shortened uniformly when (t - now) is not a multiple of dt.
    /// Throws NumericalError when the state stops being finite.
    template <typename Observer>
    void advance_to(double t, Observer&& on_step);
    void advance_to(double t) {
        advance_to(t, [](const AtomState&, const FieldSample&) {});
    }

    const AtomState& state() const { return state_; }
    const Outcome& outcome() const { return outcome_; }
    bool terminated() const { return outcome_.lost(); }

  private:
    bool single_step(double h, double t_new);

    const FieldConfig& cfg_;
    const IntegratorConfig& icfg_;
    AtomState state_;
    FieldSample sample_;
    Vec3 accel_;
    Outcome outcome_;
};

template <typename Observer>
void Propagator::advance_to(double t, Observer&& on_step) {
    if (terminated() || t <= state_.time) return;
    const double span = t - state_.time;
    const auto steps = static_cast<long long>(std::ceil(span / icfg_.dt * (1.0 - 1e-12)));
    const double h = span / static_cast<double>(std::max(steps, 1LL));
    const double t0 = state_.time;
    for (long long i = 1; i <= std::max(steps, 1LL); ++i) {
        const long long n = std::max(steps, 1LL);
        const bool alive = single_step(h, i == n ? t : t0 + static_cast<double>(i) * h);
        on_step(state_, sample_);
        if (!alive) {
            outcome_.exit_time = state_.time;
            return;
        }
    }
    outcome_.exit_time = state_.time;
}

/// Integrates `initial` until icfg.max_time or a terminal event.
Trajectory integrate(const AtomState& initial, const FieldConfig& cfg, const IntegratorConfig& icfg);

}  // namespace wireguide
