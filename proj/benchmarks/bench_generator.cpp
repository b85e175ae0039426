#include <benchmark/benchmark.h>

#include "cimle/generator.hpp"

using namespace cimle;

namespace {

GeneratorSpec bench_spec(int h, int w, int scales) {
    GeneratorSpec spec;
    spec.input_classes = 5;
    spec.noise_channels = 10;
    spec.seed_dim = 3;
    spec.height = h;
    spec.width = w;
    spec.hidden = {8};
    spec.encoder_hidden = {6, 6};
    spec.refine_scales = scales;
    return spec;
}

} // namespace

static void GeneratorForward(benchmark::State& state) {
    const GeneratorSpec spec =
        bench_spec(static_cast<int>(state.range(0)),
                   static_cast<int>(state.range(0)) * 2, 2);
    Rng rng(1);
    const GeneratorState gs = init_params(spec, rng);
    std::vector<int> ids(static_cast<std::size_t>(spec.height) * spec.width, 0);
    for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<int>(k % 5);
    const SemanticLayout x = one_hot_encode(ids, spec.height, spec.width, 5);
    const NoiseSeed z = sample_noise_seed(rng, spec.seed_dim);
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate(gs, x, z));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(GeneratorForward)->RangeMultiplier(2)->Range(8, 32)->Complexity();

static void GeneratorBackward(benchmark::State& state) {
    const GeneratorSpec spec =
        bench_spec(static_cast<int>(state.range(0)),
                   static_cast<int>(state.range(0)) * 2, 2);
    Rng rng(1);
    const GeneratorState gs = init_params(spec, rng);
    std::vector<int> ids(static_cast<std::size_t>(spec.height) * spec.width, 0);
    for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<int>(k % 5);
    const SemanticLayout x = one_hot_encode(ids, spec.height, spec.width, 5);
    const NoiseSeed z = sample_noise_seed(rng, spec.seed_dim);
    ImageTensor up(spec.height, spec.width, 3);
    for (double& v : up.data()) v = rng.next_gaussian();
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward_full(gs, x, z, up));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(GeneratorBackward)->RangeMultiplier(2)->Range(8, 32)->Complexity();

BENCHMARK_MAIN();
