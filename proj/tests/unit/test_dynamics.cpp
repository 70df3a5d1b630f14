#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "wireguide/constants.hpp"
#include "wireguide/dynamics.hpp"
#include "wireguide/errors.hpp"

using namespace wireguide;
namespace c = wireguide::constants;

namespace {

FieldConfig kepler(double current = 1.0) {
    FieldConfig cfg;
    cfg.wire.current = current;
    cfg.gravity_on = false;
    return cfg;
}

AtomState at(const Vec3& p, const Vec3& v, Seeker seeker = Seeker::HighField) {
    AtomState s;
    s.species.seeker = seeker;
    s.position = p;
    s.velocity = v;
    return s;
}

// Bound orbit with perihelion well outside the wire.
AtomState random_bound(std::mt19937_64& rng, const FieldConfig& cfg) {
    std::uniform_real_distribution<double> r(0.5e-3, 2e-3);
    std::uniform_real_distribution<double> phi(0.0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> frac(0.6, 1.25);
    std::uniform_real_distribution<double> tilt(-0.3, 0.3);
    const double r0 = r(rng);
    const double p0 = phi(rng);
    const Vec3 rho(0.0, r0 * std::cos(p0), r0 * std::sin(p0));
    const Vec3 tangent = Vec3::UnitX().cross(rho).normalized();
    const Vec3 radial = rho.normalized();
    const double vc = circular_orbit_speed(r0, AtomSpecies{}, cfg.wire);
    const double t = tilt(rng);
    return at(rho, frac(rng) * vc * (std::cos(t) * tangent + std::sin(t) * radial));
}

double max_energy_drift(const AtomState& s0, const FieldConfig& cfg, double dt, double duration) {
    IntegratorConfig icfg;
    icfg.dt = dt;
    icfg.max_time = duration;
    icfg.sample_stride = 1;
    const Trajectory tr = integrate(s0, cfg, icfg);
    double worst = 0.0;
    for (double e : tr.energy) worst = std::max(worst, std::abs(e - tr.energy.front()));
    return worst / std::abs(tr.energy.front());
}

}  // namespace

TEST_CASE("free particle advances by v dt exactly") {
    const FieldConfig cfg = kepler(0.0);
    const AtomState s0 = at(Vec3(0.25, 1e-3, -2e-3), Vec3(0.5, -0.25, 0.125));
    const AtomState s1 = step(s0, cfg, 1e-6);
    CHECK(s1.position == s0.position + 1e-6 * s0.velocity);
    CHECK(s1.velocity == s0.velocity);
    CHECK(s1.time == 1e-6);
}

TEST_CASE("harmonic test potential: Verlet period") {
    const double k = 3.0e-22;
    AtomState s;
    const double m = s.species.mass;
    const double period = 2 * std::numbers::pi * std::sqrt(m / k);
    const double dt = period / 1000;
    s.position = Vec3(1e-3, 0, 0);
    auto accel = [&](const Vec3& p) -> Vec3 { return -k / m * p; };
    // Time of the third upward zero crossing of x after start (x starts at +A).
    std::vector<double> crossings;
    double t = 0.0;
    while (crossings.size() < 3) {
        const AtomState n = verlet_step(s, accel, dt);
        if (s.position.x() < 0.0 && n.position.x() >= 0.0) {
            const double f = -s.position.x() / (n.position.x() - s.position.x());
            crossings.push_back(t + f * dt);
        }
        s = n;
        t += dt;
    }
    const double measured = (crossings[2] - crossings[0]) / 2.0;
    CHECK(std::abs(measured - period) / period < 1e-4);
}

TEST_CASE("time reversibility") {
    const FieldConfig cfg = kepler(1.0);
    const AtomState s0 = at(Vec3(0, 1e-3, 0.3e-3), Vec3(0.1, 0.05, 0.35));
    AtomState s = s0;
    for (int i = 0; i < 2000; ++i) s = step(s, cfg, 1e-6);
    s.velocity = -s.velocity;
    for (int i = 0; i < 2000; ++i) s = step(s, cfg, 1e-6);
    CHECK((s.position - s0.position).norm() < 1e-12);
    CHECK((s.velocity + s0.velocity).norm() < 1e-9);
}

TEST_CASE("circular orbit speed") {
    WireSpec w;
    AtomSpecies hfs;
    const double v = circular_orbit_speed(1e-3, hfs, w);
    CHECK(v == doctest::Approx(0.399).epsilon(2e-3));
    const double k = c::mu0_over_2pi * hfs.mu_eff * w.current;
    CHECK(k == doctest::Approx(1.855e-30).epsilon(1e-3));
    CHECK(v == doctest::Approx(std::sqrt(k / (hfs.mass * 1e-3))).epsilon(1e-14));
    CHECK(circular_orbit_speed(4e-3, hfs, w) == doctest::Approx(v / 2).epsilon(1e-14));
    AtomSpecies lfs;
    lfs.seeker = Seeker::LowField;
    CHECK_THROWS_AS(circular_orbit_speed(1e-3, lfs, w), ValidationError);
    CHECK_THROWS_AS(circular_orbit_speed(1e-5, hfs, w), ValidationError);
}

TEST_CASE("circular orbit keeps its radius for 20 ms") {
    const FieldConfig cfg = kepler(1.0);
    const double r0 = 1e-3;
    const double v = circular_orbit_speed(r0, AtomSpecies{}, cfg.wire);
    IntegratorConfig icfg;
    icfg.sample_stride = 1;
    const Trajectory tr = integrate(at(Vec3(0, r0, 0), Vec3(0.2, 0, v)), cfg, icfg);
    double worst = 0.0;
    for (const auto& s : tr.samples) worst = std::max(worst, std::abs(perpendicular_distance(s.position, cfg.wire) - r0) / r0);
    CHECK(worst < 1e-3);
    CHECK(tr.outcome.kind == OutcomeKind::Guided);
    CHECK(tr.outcome.exit_time == doctest::Approx(20e-3).epsilon(1e-12));
}

TEST_CASE("radial drop hits the wire") {
    const FieldConfig cfg = kepler(1.0);
    const Trajectory tr = integrate(at(Vec3(0, 0, 1e-3), Vec3::Zero()), cfg, IntegratorConfig{});
    CHECK(tr.outcome.kind == OutcomeKind::HitWire);
    CHECK(tr.outcome.lost());
    CHECK(tr.outcome.exit_time < 20e-3);
    CHECK(perpendicular_distance(tr.samples.back().position, cfg.wire) <= cfg.wire.radius);
}

TEST_CASE("fast atom leaves the domain") {
    const FieldConfig cfg = kepler(1.0);
    const Trajectory tr = integrate(at(Vec3(0, 1e-3, 0), Vec3(0, 3.0, 0)), cfg, IntegratorConfig{});
    CHECK(tr.outcome.kind == OutcomeKind::LeftDomain);
    CHECK(tr.outcome.exit_time == doctest::Approx(19e-3 / 3.0).epsilon(0.05));
}

TEST_CASE("free fall matches the closed form") {
    FieldConfig cfg = kepler(0.0);
    cfg.gravity_on = true;
    IntegratorConfig icfg;
    icfg.max_time = 10e-3;
    const Vec3 p0(0.0, 1e-3, 2e-3), v0(0.1, -0.2, 0.3);
    const Trajectory tr = integrate(at(p0, v0), cfg, icfg);
    const double t = 10e-3;
    const Vec3 expected = p0 + v0 * t + 0.5 * cfg.gravity_acceleration() * t * t;
    CHECK((tr.samples.back().position - expected).norm() < 1e-9);
    CHECK(tr.samples.back().time == t);
}

TEST_CASE("adiabaticity examples") {
    const FieldConfig cfg = kepler(1.0);
    const double v = circular_orbit_speed(1e-3, AtomSpecies{}, cfg.wire);
    const AtomState s = at(Vec3(0, 1e-3, 0), Vec3(0, 0, v));
    const double omega_b = v / 1e-3;
    const double omega_l = c::bohr_magneton * 2e-4 / c::hbar;
    CHECK(omega_l == doctest::Approx(1.76e7).epsilon(2e-3));
    CHECK(adiabaticity(s, cfg) == doctest::Approx(omega_b / omega_l).epsilon(1e-9));
    CHECK(adiabaticity(s, cfg) == doctest::Approx(2.3e-5).epsilon(0.02));

    FieldConfig side = cfg;
    side.bias.magnitude = 10 * c::gauss;
    const Vec3 center = side_trap_center(side.wire, side.bias).center;
    CHECK(std::isinf(adiabaticity(at(center, Vec3(0, 0.1, 0), Seeker::LowField), side)));
    CHECK(adiabaticity(at(Vec3(0, 1e-3, 0), Vec3::Zero()), cfg) == 0.0);
}

TEST_CASE("spin-flip flag latches near the zero line but the atom keeps moving") {
    FieldConfig cfg = kepler(1.0);
    cfg.bias.magnitude = 10 * c::gauss;
    const SideTrap trap = side_trap_center(cfg.wire, cfg.bias);
    // Falls past the zero line with a ~1 um impact parameter. A head-on pass keeps
    // B collinear with dB/dt, so epsilon would only blow up at the exact zero.
    const AtomState s0 = at(trap.center + Vec3(0, 1e-6, 20e-6), Vec3(0, 0, -0.3), Seeker::LowField);
    IntegratorConfig icfg;
    icfg.max_time = 3e-3;
    const Trajectory tr = integrate(s0, cfg, icfg);
    CHECK(tr.outcome.spin_flip_flagged);
    CHECK(tr.outcome.kind == OutcomeKind::SpinFlipFlagged);
    CHECK(tr.outcome.flag_time < 1.5e-3);
    CHECK(tr.outcome.exit_time == doctest::Approx(3e-3));
}

TEST_CASE("flag consistency: flagged exactly when epsilon exceeded the threshold") {
    FieldConfig cfg = kepler(1.0);
    cfg.bias.magnitude = 10 * c::gauss;
    const SideTrap trap = side_trap_center(cfg.wire, cfg.bias);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> pos(0.0, 0.1e-3), vel(0.0, 0.3);
    IntegratorConfig icfg;
    icfg.max_time = 2e-3;
    for (int k = 0; k < 20; ++k) {
        const AtomState s0 = at(trap.center + Vec3(0, pos(rng), pos(rng)), Vec3(vel(rng), vel(rng), vel(rng)), Seeker::LowField);
        Propagator prop(s0, cfg, icfg);
        double max_eps = adiabaticity(s0, cfg);
        prop.advance_to(icfg.max_time, [&](const AtomState& s, const FieldSample& f) {
            max_eps = std::max(max_eps, adiabaticity(f, s.velocity, s.species));
        });
        CHECK(prop.outcome().spin_flip_flagged == (max_eps > icfg.adiabaticity_threshold));
    }
}

TEST_CASE("energy and angular momentum conservation on bound orbits") {
    const FieldConfig cfg = kepler(1.0);
    std::mt19937_64 rng(17);
    for (int k = 0; k < 10; ++k) {
        const AtomState s0 = random_bound(rng, cfg);
        IntegratorConfig icfg;
        const Trajectory tr = integrate(s0, cfg, icfg);
        REQUIRE(tr.outcome.kind == OutcomeKind::Guided);
        double de = 0.0, dl = 0.0;
        for (std::size_t i = 0; i < tr.energy.size(); ++i) {
            de = std::max(de, std::abs(tr.energy[i] - tr.energy[0]) / std::abs(tr.energy[0]));
            dl = std::max(dl, std::abs(tr.angular_momentum[i] - tr.angular_momentum[0]) / std::abs(tr.angular_momentum[0]));
        }
        CHECK(de < 1e-5);
        CHECK(dl < 1e-8);
    }
}

TEST_CASE("second-order convergence of the energy error") {
    const FieldConfig cfg = kepler(1.0);
    std::mt19937_64 rng(23);
    const AtomState s0 = random_bound(rng, cfg);
    const double e1 = max_energy_drift(s0, cfg, 2e-6, 10e-3);
    const double e2 = max_energy_drift(s0, cfg, 1e-6, 10e-3);
    const double ratio = e1 / e2;
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}

TEST_CASE("integrate: samples, stride and preconditions") {
    const FieldConfig cfg = kepler(1.0);
    IntegratorConfig icfg;
    icfg.max_time = 1e-3;
    icfg.sample_stride = 100;
    const AtomState s0 = at(Vec3(0, 1e-3, 0), Vec3(0, 0, 0.3));
    const Trajectory tr = integrate(s0, cfg, icfg);
    CHECK(tr.samples.front().position == s0.position);
    CHECK(tr.samples.size() == 11);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) CHECK(tr.samples[i].time > tr.samples[i - 1].time);
    CHECK(tr.energy.size() == tr.samples.size());

    CHECK_THROWS_AS(integrate(at(Vec3(0, 1e-5, 0), Vec3::Zero()), cfg, icfg), ValidationError);
    icfg.dt = 0.0;
    CHECK_THROWS_AS(integrate(s0, cfg, icfg), ValidationError);
    icfg = IntegratorConfig{};
    icfg.domain_radius = 1e-6;
    CHECK_THROWS_AS(integrate(s0, cfg, icfg), ValidationError);
}

TEST_CASE("blow-up is reported as a numerical error") {
    const FieldConfig cfg = kepler(1.0);
    AtomState s0 = at(Vec3(0, 1e-3, 0), Vec3(0, 0, 0.3));
    s0.species.mu_eff = 1e300;
    try {
        integrate(s0, cfg, IntegratorConfig{});
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.last_valid_time() >= 0.0);
        CHECK(e.last_valid_time() < 1e-3);
    }
}

TEST_CASE("propagator: advance_to lands exactly on the requested time") {
    const FieldConfig cfg = kepler(1.0);
    IntegratorConfig icfg;
    Propagator p(at(Vec3(0, 1e-3, 0), Vec3(0, 0, 0.3)), cfg, icfg);
    p.advance_to(2.5e-6);
    CHECK(p.state().time == 2.5e-6);
    p.advance_to(7.3e-3);
    CHECK(p.state().time == 7.3e-3);
}

TEST_CASE("outcome names round-trip") {
    for (auto k : {OutcomeKind::Guided, OutcomeKind::HitWire, OutcomeKind::LeftDomain, OutcomeKind::SpinFlipFlagged}) {
        CHECK(outcome_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(outcome_kind_from_string("bogus"), ValidationError);
}
