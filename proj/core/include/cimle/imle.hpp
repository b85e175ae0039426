#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimle/distance.hpp"
#include "cimle/generator.hpp"
#include "cimle/rng.hpp"
#include "cimle/tensor.hpp"

namespace cimle {

/// Hyperparameters of the training loop. One epoch is one outer iteration
/// over a freshly drawn batch S, as the update rule is written, not a full
/// pass over the dataset.
struct TrainConfig {
    int epochs = 1;              // E (0 is the empty loop)
    int batch_size = 1;          // |S|
    int samples_per_example = 1; // m
    int inner_steps = 1;         // K
    int inner_batch_size = 1;    // |S~|
    double learning_rate = 1e-5; // eta
    bool rebalance = false;
    enum class Distance { Perceptual, L2 };
    Distance distance = Distance::Perceptual;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Outcome of the nearest-sample search for one ground-truth example.
struct MatchRecord {
    int example_index = 0; // i (dataset index)
    int sample_index = 0;  // sigma(i), 0-based position among the candidates
    NoiseSeed seed;        // cached noise for (i, sigma(i)); the other m-1 are dropped
    double distance = 0.0;
};

/// argmin over candidates; ties resolve to the lowest index. Non-finite
/// distances are rejected.
MatchRecord match(
    const ImageTensor& y, std::span<const ImageTensor> candidates,
    const std::function<double(const ImageTensor&, const ImageTensor&)>& dist,
    int example_index = 0);

/// (1/n) sum_i min_j dist(T(x_i, z_ij), y_i). Candidate j for example i is
/// generated from x_i only, so an example can never match an output made
/// from a different label.
double conditional_objective(const GeneratorState& state,
                             std::span<const Example> batch,
                             const std::vector<std::vector<NoiseSeed>>& seeds,
                             const Metric& metric);

/// (1/n) sum_i min_j dist(T(x, z_j), y_i) with one candidate pool shared
/// across every target: the unconditional objective, realized here with a
/// single fixed layout standing in for "no label".
double unconditional_objective(const GeneratorState& state,
                               const SemanticLayout& shared_layout,
                               std::span<const NoiseSeed> pool,
                               std::span<const ImageTensor> targets,
                               const Metric& metric);

struct EpochStats {
    int epoch = 0;
    double mean_matched_distance = 0.0;
    double wallclock_ms = 0.0; // reported via logging, never in artifacts
};

struct TrainResult {
    GeneratorState state;
    std::vector<EpochStats> log;
    LayerWeights lambda;          // calibrated weights (empty for L2 runs)
    std::uint64_t metric_seed = 0;
};

struct TrainOptions {
    std::uint64_t metric_seed = 17; // feature-pyramid seed for the training loss
    int workers = 1;
    int checkpoint_every = 0;       // epochs between checkpoint callbacks, 0 = off
    std::function<void(int, const GeneratorState&, const LayerWeights&)> on_checkpoint;
};

/// Raised when training hits a non-finite loss; carries the state at the
/// point of failure so a diagnostic checkpoint can be written.
struct DivergenceError : std::runtime_error {
    GeneratorState diagnostic;

    DivergenceError(const std::string& msg, GeneratorState state)
        : std::runtime_error(msg), diagnostic(std::move(state)) {}
};

/// The full training loop: per epoch, draw a batch (rarity-weighted when
/// rebalancing is on, uniform otherwise), generate m candidates per
/// example and match each example to its nearest one under the frozen
/// current parameters, then run K inner gradient steps on random inner
/// batches, recomputing the matched outputs under the live parameters
/// with the cached noise. The perceptual metric's layer weights are
/// calibrated on the first batch and frozen.
TrainResult train(const Dataset& dataset, const GeneratorSpec& gen_spec,
                  const TrainConfig& config, const Rng& rng,
                  const TrainOptions& opts = {});

} // namespace cimle
