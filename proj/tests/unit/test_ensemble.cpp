#include <doctest.h>

#include <cmath>

#include "wireguide/constants.hpp"
#include "wireguide/ensemble.hpp"
#include "wireguide/errors.hpp"

using namespace wireguide;
namespace c = wireguide::constants;

namespace {

struct Moments {
    Vec3 mean = Vec3::Zero();
    Vec3 sd = Vec3::Zero();
};

template <typename Get>
Moments moments(const std::vector<AtomState>& atoms, Get get) {
    Moments m;
    for (const auto& a : atoms) m.mean += get(a);
    m.mean /= static_cast<double>(atoms.size());
    for (const auto& a : atoms) m.sd += (get(a) - m.mean).cwiseAbs2();
    m.sd = (m.sd / static_cast<double>(atoms.size() - 1)).cwiseSqrt();
    return m;
}

bool same(const EnsembleSnapshot& a, const EnsembleSnapshot& b) {
    if (a.time != b.time || a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.states[i].position != b.states[i].position || a.states[i].velocity != b.states[i].velocity) return false;
        if (a.states[i].species.seeker != b.states[i].species.seeker) return false;
        if (a.tags[i].kind != b.tags[i].kind || a.tags[i].exit_time != b.tags[i].exit_time) return false;
        if (a.tags[i].spin_flip_flagged != b.tags[i].spin_flip_flagged) return false;
    }
    return true;
}

SequenceSpec kepler_spec(double guide_time, bool gravity) {
    SequenceSpec s;
    s.guide.wire.current = 1.0;
    s.guide.gravity_on = gravity;
    s.guide_time = guide_time;
    s.snapshot_times = {0.0, guide_time};
    return s;
}

}  // namespace

TEST_CASE("thermal velocity spread of Li-7 at 200 uK") {
    CHECK(thermal_velocity_sigma(200e-6, c::lithium7_mass) == doctest::Approx(0.487).epsilon(2e-3));
    MotParams p;
    CHECK(p.position_sigma() == doctest::Approx(1.6e-3 / (2 * std::sqrt(2 * std::log(2.0)))).epsilon(1e-14));
}

TEST_CASE("sample_mot: moments, seekers and determinism") {
    MotParams p;
    p.atom_count = 20000;
    const auto atoms = sample_mot(p, AtomSpecies{}, 42);
    REQUIRE(atoms.size() == p.atom_count);
    const double n = static_cast<double>(atoms.size());
    const auto pos = moments(atoms, [](const AtomState& a) { return a.position; });
    const auto vel = moments(atoms, [](const AtomState& a) { return a.velocity; });
    const double sx = p.position_sigma();
    const double sv = thermal_velocity_sigma(p.temperature, c::lithium7_mass);
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(pos.mean[k] - p.center_offset[k]) < 5 * sx / std::sqrt(n));
        CHECK(std::abs(vel.mean[k]) < 5 * sv / std::sqrt(n));
        CHECK(std::abs(pos.sd[k] / sx - 1) < 5 / std::sqrt(2 * n));
        CHECK(std::abs(vel.sd[k] / sv - 1) < 5 / std::sqrt(2 * n));
    }
    std::size_t high = 0;
    for (const auto& a : atoms) high += a.species.seeker == Seeker::HighField;
    CHECK(std::abs(high / n - 0.5) < 5 * 0.5 / std::sqrt(n));

    const auto again = sample_mot(p, AtomSpecies{}, 42);
    bool identical = true;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        identical = identical && atoms[i].position == again[i].position && atoms[i].velocity == again[i].velocity &&
                    atoms[i].species.seeker == again[i].species.seeker;
    }
    CHECK(identical);
    const auto other = sample_mot(p, AtomSpecies{}, 43);
    CHECK(other[0].position != atoms[0].position);
    CHECK(other[1].position != atoms[0].position);
}

TEST_CASE("small master seeds do not share atom streams") {
    MotParams p;
    p.atom_count = 64;
    const auto a = sample_mot(p, AtomSpecies{}, 1);
    const auto b = sample_mot(p, AtomSpecies{}, 2);
    for (const auto& x : a) {
        for (const auto& y : b) CHECK(x.position != y.position);
    }
}

TEST_CASE("seeker weights are honoured") {
    MotParams p;
    p.atom_count = 500;
    p.seeker_fractions = {1.0, 0.0};
    for (const auto& a : sample_mot(p, AtomSpecies{}, 1)) CHECK(a.species.seeker == Seeker::HighField);
    p.seeker_fractions = {0.0, 1.0};
    for (const auto& a : sample_mot(p, AtomSpecies{}, 1)) CHECK(a.species.seeker == Seeker::LowField);
}

TEST_CASE("MOT and sequence validation") {
    MotParams p;
    p.atom_count = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = MotParams{};
    p.seeker_fractions = {0.5, 0.6};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = MotParams{};
    p.temperature = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    SequenceSpec s;
    s.snapshot_times = {5e-3, 1e-3};
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.snapshot_times = {0.0, 30e-3};
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("identity sequence returns the initial sample") {
    MotParams p;
    p.atom_count = 200;
    SequenceSpec s;
    s.guide_time = 0.0;
    s.snapshot_times = {0.0};
    s.master_seed = 9;
    const auto snaps = run_sequence(p, AtomSpecies{}, s, IntegratorConfig{});
    REQUIRE(snaps.size() == 1);
    const auto atoms = sample_mot(p, AtomSpecies{}, 9);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        CHECK(snaps[0].states[i].position == atoms[i].position);
        CHECK(snaps[0].states[i].velocity == atoms[i].velocity);
    }
}

TEST_CASE("free Gaussian expansion law without fields") {
    MotParams p;
    p.atom_count = 20000;
    p.center_offset = Vec3::Zero();
    SequenceSpec s;
    s.guide.wire.current = 0.0;
    s.guide.gravity_on = false;
    s.guide_time = 5e-3;
    s.snapshot_times = {0.0, 5e-3};
    IntegratorConfig icfg;
    icfg.wire_collision_on = false;
    const auto snaps = run_sequence(p, AtomSpecies{}, s, icfg);
    const auto sd = moments(snaps.back().states, [](const AtomState& a) { return a.position; }).sd;
    const double sx = p.position_sigma();
    const double sv = thermal_velocity_sigma(p.temperature, c::lithium7_mass);
    const double expected = std::sqrt(sx * sx + sv * sv * 25e-6);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(sd[k] / expected - 1) < 5 / std::sqrt(2.0 * p.atom_count));
}

TEST_CASE("results do not depend on the worker count") {
    MotParams p;
    p.atom_count = 300;
    SequenceSpec s = kepler_spec(5e-3, true);
    s.snapshot_times = {0.0, 2e-3, 5e-3};
    s.free_expansion_time = 3e-3;
    const auto one = run_sequence(p, AtomSpecies{}, s, IntegratorConfig{}, RunOptions{1});
    for (unsigned t : {4u, 8u}) {
        const auto many = run_sequence(p, AtomSpecies{}, s, IntegratorConfig{}, RunOptions{t});
        REQUIRE(many.size() == one.size());
        for (std::size_t k = 0; k < one.size(); ++k) CHECK(same(one[k], many[k]));
    }
}

TEST_CASE("atom conservation and monotone outcome tags") {
    MotParams p;
    p.atom_count = 400;
    SequenceSpec s = kepler_spec(10e-3, true);
    s.snapshot_times = {0.0, 2e-3, 4e-3, 6e-3, 8e-3, 10e-3};
    const auto snaps = run_sequence(p, AtomSpecies{}, s, IntegratorConfig{});
    REQUIRE(snaps.size() == 6);
    std::size_t lost_at_end = 0;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        CHECK(snaps[k].size() == p.atom_count);
        CHECK(snaps[k].time == s.snapshot_times[k]);
        if (k == 0) continue;
        for (std::size_t i = 0; i < p.atom_count; ++i) {
            const auto& before = snaps[k - 1].tags[i];
            const auto& now = snaps[k].tags[i];
            if (before.lost()) {
                CHECK(now.kind == before.kind);
                CHECK(now.exit_time == before.exit_time);
            }
            if (before.spin_flip_flagged) CHECK(now.spin_flip_flagged);
        }
    }
    for (const auto& t : snaps.back().tags) lost_at_end += t.lost();
    CHECK(lost_at_end > 0);
}

TEST_CASE("atoms that hit the wire stay put, escaped atoms keep flying") {
    MotParams p;
    p.atom_count = 300;
    SequenceSpec s = kepler_spec(10e-3, false);
    s.snapshot_times = {5e-3, 10e-3};
    IntegratorConfig icfg;
    icfg.domain_radius = 2e-3;
    const auto snaps = run_sequence(p, AtomSpecies{}, s, icfg);
    std::size_t escaped = 0;
    for (std::size_t i = 0; i < p.atom_count; ++i) {
        const auto& a = snaps[0];
        const auto& b = snaps[1];
        if (a.tags[i].kind == OutcomeKind::HitWire) CHECK(b.states[i].position == a.states[i].position);
        if (a.tags[i].kind == OutcomeKind::LeftDomain) {
            ++escaped;
            const Vec3 expected = a.states[i].position + 5e-3 * a.states[i].velocity;
            CHECK((b.states[i].position - expected).norm() < 1e-12);
        }
    }
    CHECK(escaped > 0);
}

TEST_CASE("ballistic expansion") {
    EnsembleSnapshot snap;
    AtomState a;
    a.velocity = Vec3(1, 0, 0);
    snap.states = {a, a};
    snap.tags.resize(2);
    snap.tags[1].kind = OutcomeKind::HitWire;
    const auto same0 = ballistic_expand(snap, 0.0);
    CHECK(same0.states[0].position == a.position);
    const auto out = ballistic_expand(snap, 9e-3);
    CHECK(out.states[0].position.x() == doctest::Approx(9e-3).epsilon(1e-14));
    CHECK(out.states[0].velocity == a.velocity);
    CHECK(out.states[1].position == a.position);
    CHECK(out.time == doctest::Approx(9e-3));
    const Vec3 g(0, 0, -9.80665);
    const auto fall = ballistic_expand(snap, 10e-3, g);
    CHECK(fall.states[0].position.z() == doctest::Approx(-0.5 * 9.80665 * 1e-4).epsilon(1e-12));
    CHECK_THROWS_AS(ballistic_expand(snap, -1.0), ValidationError);
}

TEST_CASE("Kepler bound criterion") {
    WireSpec w;
    AtomState s;
    s.position = Vec3(0, 1e-3, 0);
    const double vc = circular_orbit_speed(1e-3, s.species, w);
    s.velocity = Vec3(0.4, 0, vc);
    CHECK(kepler_bound(s, w));
    CHECK(kepler_perihelion(s, w) == doctest::Approx(1e-3).epsilon(1e-9));
    s.velocity = Vec3(0, 0, 1.5 * vc);   // E = 0.125 k / r > 0
    CHECK_FALSE(kepler_bound(s, w));
    s.velocity = Vec3(0, -0.1, 0);       // radial, L = 0
    CHECK_FALSE(kepler_bound(s, w));
    s.velocity = Vec3(0, 0, 0.05 * vc);  // bound but perihelion inside the wire
    CHECK(kepler_perihelion(s, w) < w.radius);
    CHECK_FALSE(kepler_bound(s, w));
    s.species.seeker = Seeker::LowField;
    s.velocity = Vec3(0, 0, vc);
    CHECK_FALSE(kepler_bound(s, w));
}

TEST_CASE("loading efficiency: controls") {
    MotParams p;
    p.atom_count = 300;
    SequenceSpec s = kepler_spec(5e-3, true);
    s.guide.wire.current = 0.0;
    const auto snaps = run_sequence(p, AtomSpecies{}, s, IntegratorConfig{});
    const auto e = loading_efficiency(snaps, LoadingCriterion::EnergyBased, s.guide, s.guide_time);
    const auto v = loading_efficiency(snaps, LoadingCriterion::SurvivalBased, s.guide, s.guide_time);
    REQUIRE(e);
    REQUIRE(v);
    CHECK(e->fraction == 0.0);
    CHECK(v->fraction == 0.0);
    CHECK(v->total == p.atom_count);

    SequenceSpec side = s;
    side.guide.wire.current = 1.0;
    side.guide.bias.magnitude = 10 * c::gauss;
    CHECK_FALSE(loading_efficiency(snaps, LoadingCriterion::EnergyBased, side.guide, side.guide_time).has_value());
    CHECK_THROWS_AS(loading_efficiency({EnsembleSnapshot{}}, LoadingCriterion::SurvivalBased, side.guide, 0.0),
                    ValidationError);
}

TEST_CASE("seeker split: wrong seekers are never loaded") {
    MotParams p;
    p.atom_count = 400;
    LoadingOptions side_opts;
    side_opts.capture_radius = 1e-3;

    p.seeker_fractions = {1.0, 0.0};
    SequenceSpec side = kepler_spec(10e-3, true);
    side.guide.bias.magnitude = 10 * c::gauss;
    p.center_offset = side_trap_center(side.guide.wire, side.guide.bias).center;
    const auto a = run_sequence(p, AtomSpecies{}, side, IntegratorConfig{});
    CHECK(loading_efficiency(a, LoadingCriterion::SurvivalBased, side.guide, side.guide_time, side_opts)->fraction == 0.0);

    p = MotParams{};
    p.atom_count = 400;
    p.seeker_fractions = {0.0, 1.0};
    const SequenceSpec kep = kepler_spec(10e-3, true);
    const auto b = run_sequence(p, AtomSpecies{}, kep, IntegratorConfig{});
    CHECK(loading_efficiency(b, LoadingCriterion::SurvivalBased, kep.guide, kep.guide_time)->fraction == 0.0);
    CHECK(loading_efficiency(b, LoadingCriterion::EnergyBased, kep.guide, kep.guide_time)->fraction == 0.0);
}

TEST_CASE("energy-based and survival-based Kepler efficiencies agree without gravity") {
    MotParams p;
    p.atom_count = 2000;
    const SequenceSpec s = kepler_spec(20e-3, false);
    const auto snaps = run_sequence(p, AtomSpecies{}, s, IntegratorConfig{});
    const auto e = loading_efficiency(snaps, LoadingCriterion::EnergyBased, s.guide, s.guide_time);
    const auto v = loading_efficiency(snaps, LoadingCriterion::SurvivalBased, s.guide, s.guide_time);
    REQUIRE(e);
    REQUIRE(v);
    const double se = std::hypot(e->standard_error, v->standard_error);
    CHECK(std::abs(e->fraction - v->fraction) < 3 * se);
    CHECK(e->standard_error == doctest::Approx(std::sqrt(e->fraction * (1 - e->fraction) / 2000.0)));
}
