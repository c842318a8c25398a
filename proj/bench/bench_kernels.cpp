// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include "igs/flow.hpp"
#include "igs/modulus.hpp"

using namespace igs;

namespace {

void universal(benchmark::State& state, const char* name, int m, bool parallel) {
    const IgsSpec spec = builtin_system(name);
    const ReplacementGraph g = build_graph(spec, m);
    const Symmetries sym = find_symmetries(spec);
    for (auto _ : state) benchmark::DoNotOptimize(universal_density(spec, g, sym, 2.0, {}, Exec{parallel}).mass);
}

void basis(benchmark::State& state, const char* name, int m, bool parallel) {
    const IgsSpec spec = builtin_system(name);
    const TildeGraph tg = build_tilde_graph(spec, m);
    for (auto _ : state) benchmark::DoNotOptimize(build_flow_basis(spec, tg, 2.0, Exec{parallel}).energy);
}

}  // namespace

BENCHMARK_CAPTURE(universal, carpet3_serial, "sierpinski-carpet", 3, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(universal, carpet3_parallel, "sierpinski-carpet", 3, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(universal, menger2_serial, "menger-sponge", 2, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(universal, menger2_parallel, "menger-sponge", 2, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(basis, carpet3_serial, "sierpinski-carpet", 3, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(basis, carpet3_parallel, "sierpinski-carpet", 3, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(basis, menger2_serial, "menger-sponge", 2, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(basis, menger2_parallel, "menger-sponge", 2, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
