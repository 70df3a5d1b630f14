#include <benchmark/benchmark.h>

#include "wireguide/dynamics.hpp"
#include "wireguide/ensemble.hpp"
#include "wireguide/field.hpp"
#include "wireguide/imaging.hpp"

using namespace wireguide;

namespace {

FieldConfig side_config() {
    FieldConfig cfg;
    cfg.wire.current = 1.0;
    cfg.bias.magnitude = 10e-4;
    return cfg;
}

void BM_Force(benchmark::State& state) {
    const FieldConfig cfg = side_config();
    AtomSpecies atom;
    atom.seeker = Seeker::LowField;
    Vec3 p(0.0, -0.3e-3, 0.1e-3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(force(p, atom, cfg));
        p.x() += 1e-9;
    }
}
BENCHMARK(BM_Force);

void BM_Step(benchmark::State& state) {
    FieldConfig cfg;
    AtomState s;
    s.position = Vec3(0, 1e-3, 0);
    s.velocity = Vec3(0, 0, circular_orbit_speed(1e-3, s.species, cfg.wire));
    for (auto _ : state) {
        s = step(s, cfg, 1e-6);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_Step);

// 1000 atoms for 1 ms in the Kepler guide; scales linearly to the 10^4 x 20 ms case.
void BM_Ensemble(benchmark::State& state) {
    MotParams mot;
    mot.atom_count = 1000;
    SequenceSpec spec;
    spec.guide_time = 1e-3;
    spec.snapshot_times = {0.0, 1e-3};
    RunOptions opt;
    opt.threads = static_cast<unsigned>(state.range(0));
    for (auto _ : state) {
        auto snaps = run_sequence(mot, AtomSpecies{}, spec, IntegratorConfig{}, opt);
        benchmark::DoNotOptimize(snaps);
    }
    state.SetItemsProcessed(state.iterations() * 1000 * 1000);   // atom steps
}
BENCHMARK(BM_Ensemble)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_RenderAndProject(benchmark::State& state) {
    MotParams mot;
    mot.atom_count = 10000;
    EnsembleSnapshot snap;
    snap.states = sample_mot(mot, AtomSpecies{}, 1);
    snap.tags.resize(snap.states.size());
    const FieldConfig cfg;
    ImagingGeometry g;
    for (auto _ : state) {
        const CcdImage img = render_ccd(snap, cfg, g);
        benchmark::DoNotOptimize(project_profile(img, ImageAxis::U));
    }
}
BENCHMARK(BM_RenderAndProject)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
