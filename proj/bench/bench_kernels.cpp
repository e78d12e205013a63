// Serial reference versus OpenMP trial loops, plus the single-solve kernel.

#include <benchmark/benchmark.h>

#include "hpe/facemodel.hpp"
#include "hpe/pnp.hpp"
#include "hpe/study.hpp"

using namespace hpe;

namespace {

StudyConfig jitter_config(Execution exec, int trials) {
    StudyConfig c;
    c.kind = StudyKind::jitter;
    c.trials = trials;
    c.sweep = {0, 5, 10};
    c.execution = exec;
    return c;
}

void BM_JitterStudy(benchmark::State& state, Execution exec) {
    const StudyConfig c = jitter_config(exec, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto report = run_jitter_study(c);
        benchmark::DoNotOptimize(report);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_StretchStudy(benchmark::State& state, Execution exec) {
    StudyConfig c;
    c.kind = StudyKind::stretch;
    c.trials = static_cast<int>(state.range(0));
    c.execution = exec;
    for (auto _ : state) {
        auto report = run_stretch_study(c);
        benchmark::DoNotOptimize(report);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SolvePnP(benchmark::State& state) {
    const FaceModel face = builtin_mean_face();
    const auto k = default_intrinsics(450, 450);
    const Pose truth = Pose::from_euler({40, -25, 15}, Vec3(0.1, -0.05, 5));
    const auto& subset = named_subsets()[static_cast<std::size_t>(state.range(0))];
    const PnPProblem p{select(face, subset), select(project(face.points, truth, k), subset), k};
    for (auto _ : state) {
        auto sol = solve_pnp(p);
        benchmark::DoNotOptimize(sol);
    }
    state.SetLabel(subset.name);
}

}  // namespace

BENCHMARK_CAPTURE(BM_JitterStudy, serial, Execution::serial)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_JitterStudy, parallel, Execution::parallel)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_StretchStudy, serial, Execution::serial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_StretchStudy, parallel, Execution::parallel)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolvePnP)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
