#include <benchmark/benchmark.h>

#include "cimle/distance.hpp"
#include "cimle/rebalance.hpp"
#include "cimle/rng.hpp"

using namespace cimle;

static void PerceptualDistance(benchmark::State& state) {
    const int h = static_cast<int>(state.range(0));
    const int w = 2 * h;
    const FeatureExtractor fe = make_default_extractor(17, h, w);
    LayerWeights lw;
    lw.lambda.assign(fe.layers(), 1.0);
    Rng rng(3);
    ImageTensor y(h, w, 3), yhat(h, w, 3);
    for (double& v : y.data()) v = rng.next_uniform();
    for (double& v : yhat.data()) v = rng.next_uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(perceptual_distance(fe, lw, y, yhat));
    }
    state.SetComplexityN(h);
}
BENCHMARK(PerceptualDistance)->RangeMultiplier(2)->Range(8, 64)->Complexity();

static void PerceptualDistanceGrad(benchmark::State& state) {
    const int h = static_cast<int>(state.range(0));
    const int w = 2 * h;
    const FeatureExtractor fe = make_default_extractor(17, h, w);
    LayerWeights lw;
    lw.lambda.assign(fe.layers(), 1.0);
    Rng rng(3);
    ImageTensor y(h, w, 3), yhat(h, w, 3);
    for (double& v : y.data()) v = rng.next_uniform();
    for (double& v : yhat.data()) v = rng.next_uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(perceptual_distance_grad(fe, lw, y, yhat));
    }
    state.SetComplexityN(h);
}
BENCHMARK(PerceptualDistanceGrad)->RangeMultiplier(2)->Range(8, 64)->Complexity();

static void KdeDensity(benchmark::State& state) {
    Rng rng(5);
    std::vector<std::array<double, 3>> centres(state.range(0));
    for (auto& c : centres) {
        c = {rng.next_uniform(), rng.next_uniform(), rng.next_uniform()};
    }
    const Kde kde = fit_kde(centres, 0.1);
    const std::array<double, 3> q{0.4, 0.5, 0.6};
    for (auto _ : state) {
        benchmark::DoNotOptimize(kde.density(q));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(KdeDensity)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

BENCHMARK_MAIN();
