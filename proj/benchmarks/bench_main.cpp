#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "fdialab/commands.hpp"
#include "fdialab/state_estimation.hpp"

using namespace fdialab;

namespace {

GridCase load_fixture(const char* name) {
    std::ifstream in(std::string(FDIALAB_FIXTURE_DIR) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

struct Fixture {
    GridCase grid;
    GraphTopology topo;
    AnyDetector arma;
    AnyDetector mlp;
    Mat x;

    explicit Fixture(const char* name) : grid(load_fixture(name)) {
        topo = build_topology(build_ybus(grid));
        Rng rng(1);
        arma = make_arma_detector(grid.n(), 3, 16, 2, 4, rng);
        mlp = make_mlp(grid.n(), 2, 32, rng);
        x = Mat(grid.n(), 2);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();
    }
};

Fixture& ieee14() {
    static Fixture f("case14.m");
    return f;
}
Fixture& ieee57() {
    static Fixture f("case57.m");
    return f;
}

}  // namespace

static void BM_PowerFlow14(benchmark::State& state) {
    auto& f = ieee14();
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_power_flow(f.grid, Loading::uniform(f.grid.n(), 1.0)));
    }
}
BENCHMARK(BM_PowerFlow14);

static void BM_PowerFlow57(benchmark::State& state) {
    auto& f = ieee57();
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_power_flow(f.grid, Loading::uniform(f.grid.n(), 1.0)));
    }
}
BENCHMARK(BM_PowerFlow57);

static void BM_ArmaForward14(benchmark::State& state) {
    auto& f = ieee14();
    for (auto _ : state) {
        benchmark::DoNotOptimize(detector_forward(f.arma, &f.topo, f.x));
    }
}
BENCHMARK(BM_ArmaForward14);

static void BM_ArmaForward57(benchmark::State& state) {
    auto& f = ieee57();
    for (auto _ : state) {
        benchmark::DoNotOptimize(detector_forward(f.arma, &f.topo, f.x));
    }
}
BENCHMARK(BM_ArmaForward57);

static void BM_MlpForward14(benchmark::State& state) {
    auto& f = ieee14();
    for (auto _ : state) {
        benchmark::DoNotOptimize(detector_forward(f.mlp, nullptr, f.x));
    }
}
BENCHMARK(BM_MlpForward14);

static void BM_JacobiEig57(benchmark::State& state) {
    auto& f = ieee57();
    for (auto _ : state) {
        benchmark::DoNotOptimize(symmetric_eig(f.topo.l));
    }
}
BENCHMARK(BM_JacobiEig57);

static void BM_Wlse14(benchmark::State& state) {
    auto& f = ieee14();
    const StateVector x = solve_power_flow(f.grid, Loading::uniform(f.grid.n(), 1.0));
    const MeasurementFrame frame = add_noise(measurement_function(f.grid, x), 0.01, 7);
    const Vec sigma = noise_sigmas(frame, 0.01);
    Vec r(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) r[i] = sigma[i] * sigma[i];
    for (auto _ : state) {
        benchmark::DoNotOptimize(wlse_estimate(f.grid, frame, r));
    }
}
BENCHMARK(BM_Wlse14);

BENCHMARK_MAIN();
