#include "cimle/imle.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "cimle/log.hpp"
#include "cimle/parallel.hpp"
#include "cimle/rebalance.hpp"

namespace cimle {

namespace {

// fork() tag namespaces for the independent random streams of a run.
constexpr std::uint64_t kTagInit = 1;
constexpr std::uint64_t kTagBatch = 2;
constexpr std::uint64_t kTagNoise = 3;
constexpr std::uint64_t kTagInner = 4;
constexpr std::uint64_t kTagCalib = 5;

int uniform_index(Rng& rng, int n) {
    const int v = static_cast<int>(rng.next_uniform() * n);
    return v >= n ? n - 1 : v;
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch_size < 1 || samples_per_example < 1 || inner_steps < 1 ||
        inner_batch_size < 1) {
        throw std::invalid_argument("TrainConfig: counts must be >= 1");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("TrainConfig: learning rate must be positive");
    }
}

MatchRecord match(
    const ImageTensor& y, std::span<const ImageTensor> candidates,
    const std::function<double(const ImageTensor&, const ImageTensor&)>& dist,
    int example_index) {
    if (candidates.empty()) {
        throw std::invalid_argument("match: needs at least one candidate");
    }
    MatchRecord rec;
    rec.example_index = example_index;
    rec.sample_index = 0;
    rec.distance = dist(y, candidates[0]);
    if (!std::isfinite(rec.distance)) {
        throw NumericError("match: non-finite distance");
    }
    for (std::size_t j = 1; j < candidates.size(); ++j) {
        const double d = dist(y, candidates[j]);
        if (!std::isfinite(d)) throw NumericError("match: non-finite distance");
        if (d < rec.distance) {
            rec.distance = d;
            rec.sample_index = static_cast<int>(j);
        }
    }
    return rec;
}

double conditional_objective(const GeneratorState& state,
                             std::span<const Example> batch,
                             const std::vector<std::vector<NoiseSeed>>& seeds,
                             const Metric& metric) {
    if (batch.empty() || seeds.size() != batch.size()) {
        throw std::invalid_argument("conditional_objective: batch/seed mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (seeds[i].empty()) {
            throw std::invalid_argument("conditional_objective: empty candidate set");
        }
        double best = std::numeric_limits<double>::infinity();
        for (const NoiseSeed& z : seeds[i]) {
            const ImageTensor out = generate(state, batch[i].layout, z);
            best = std::min(best, metric.value(batch[i].image, out, nullptr));
        }
        total += best;
    }
    return total / static_cast<double>(batch.size());
}

double unconditional_objective(const GeneratorState& state,
                               const SemanticLayout& shared_layout,
                               std::span<const NoiseSeed> pool,
                               std::span<const ImageTensor> targets,
                               const Metric& metric) {
    if (pool.empty() || targets.empty()) {
        throw std::invalid_argument("unconditional_objective: empty pool or targets");
    }
    std::vector<ImageTensor> samples;
    samples.reserve(pool.size());
    for (const NoiseSeed& z : pool) {
        samples.push_back(generate(state, shared_layout, z));
    }
    double total = 0.0;
    for (const ImageTensor& y : targets) {
        double best = std::numeric_limits<double>::infinity();
        for (const ImageTensor& s : samples) {
            best = std::min(best, metric.value(y, s, nullptr));
        }
        total += best;
    }
    return total / static_cast<double>(targets.size());
}

TrainResult train(const Dataset& dataset, const GeneratorSpec& gen_spec,
                  const TrainConfig& config, const Rng& rng,
                  const TrainOptions& opts) {
    config.validate();
    gen_spec.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    const int n = static_cast<int>(dataset.size());

    Rng init_rng = rng.fork(kTagInit);
    GeneratorState state = init_params(gen_spec, init_rng);

    // Rebalancing quantities are a one-shot preprocessing pass.
    std::unique_ptr<RarityTable> table;
    std::vector<PixelMask> masks;
    if (config.rebalance) {
        table = std::make_unique<RarityTable>(rarity_scores(dataset));
        masks.reserve(dataset.size());
        for (int k = 0; k < n; ++k) {
            masks.push_back(rarity_mask(dataset[k].layout, k, *table));
        }
    }
    auto mask_of = [&](int k) -> const PixelMask* {
        return config.rebalance ? &masks[k] : nullptr;
    };

    auto draw_batch = [&](int epoch) {
        Rng batch_rng = rng.fork(kTagBatch, static_cast<std::uint64_t>(epoch));
        if (config.rebalance) {
            return sample_batch(*table, batch_rng, config.batch_size);
        }
        std::vector<int> batch(config.batch_size);
        for (int& k : batch) k = uniform_index(batch_rng, n);
        return batch;
    };

    // Metric: plain squared L2, or the feature distance with layer weights
    // calibrated once against the initial model on the first batch.
    TrainResult result;
    std::unique_ptr<Metric> metric;
    if (config.distance == TrainConfig::Distance::L2) {
        metric = std::make_unique<L2Metric>();
        result.metric_seed = 0;
    } else {
        FeatureExtractor fe =
            make_default_extractor(opts.metric_seed, gen_spec.height, gen_spec.width);
        std::vector<std::pair<ImageTensor, ImageTensor>> pairs;
        const std::vector<int> first_batch = draw_batch(1);
        Rng calib_rng = rng.fork(kTagCalib);
        for (int k : first_batch) {
            const NoiseSeed z = sample_noise_seed(calib_rng, gen_spec.seed_dim);
            pairs.emplace_back(dataset[k].image, generate(state, dataset[k].layout, z));
        }
        LayerWeights lw = calibrate_lambda(fe, pairs);
        result.lambda = lw;
        result.metric_seed = opts.metric_seed;
        metric = std::make_unique<PerceptualMetric>(std::move(fe), std::move(lw));
    }

    const int workers = opts.workers > 0 ? opts.workers : default_workers();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<int> batch = draw_batch(epoch);
        const int bs = static_cast<int>(batch.size());

        // Matching phase: m candidates per example against the parameters
        // frozen at the start of the epoch; keep only the matched noise.
        std::vector<MatchRecord> records(bs);
        try {
            parallel_for(bs, workers, [&](int pos) {
                const int k = batch[pos];
                Rng noise_rng = rng.fork(kTagNoise, static_cast<std::uint64_t>(epoch),
                                         static_cast<std::uint64_t>(pos));
                MatchRecord best;
                best.example_index = k;
                for (int j = 0; j < config.samples_per_example; ++j) {
                    NoiseSeed z = sample_noise_seed(noise_rng, gen_spec.seed_dim);
                    const ImageTensor out = generate(state, dataset[k].layout, z);
                    const double d = metric->value(dataset[k].image, out, mask_of(k));
                    if (!std::isfinite(d)) {
                        throw NumericError("train: non-finite matched distance");
                    }
                    if (j == 0 || d < best.distance) {
                        best.sample_index = j;
                        best.distance = d;
                        best.seed = std::move(z);
                    }
                }
                records[pos] = std::move(best);
            });
        } catch (const NumericError& e) {
            throw DivergenceError(e.what(), state);
        }

        double mean_matched = 0.0;
        for (const MatchRecord& r : records) mean_matched += r.distance;
        mean_matched /= static_cast<double>(bs);

        // K inner steps on random inner batches; sigma stays fixed, the
        // matched outputs are recomputed under the live parameters.
        try {
            for (int step = 1; step <= config.inner_steps; ++step) {
                Rng inner_rng = rng.fork(kTagInner, static_cast<std::uint64_t>(epoch),
                                         static_cast<std::uint64_t>(step));
                GeneratorGrad acc;
                acc.theta.assign(state.theta.size(), 0.0);
                acc.theta_e.assign(state.theta_e.size(), 0.0);
                for (int t = 0; t < config.inner_batch_size; ++t) {
                    const MatchRecord& rec = records[uniform_index(inner_rng, bs)];
                    const int k = rec.example_index;
                    const ImageTensor out = generate(state, dataset[k].layout, rec.seed);
                    const double loss = metric->value(dataset[k].image, out, mask_of(k));
                    if (!std::isfinite(loss)) {
                        throw NumericError("train: non-finite inner loss");
                    }
                    const ImageTensor up =
                        metric->grad(dataset[k].image, out, mask_of(k));
                    GeneratorGrad g = backward_full(state, dataset[k].layout, rec.seed, up);
                    for (std::size_t q = 0; q < acc.theta.size(); ++q) {
                        acc.theta[q] += g.theta[q];
                    }
                    for (std::size_t q = 0; q < acc.theta_e.size(); ++q) {
                        acc.theta_e[q] += g.theta_e[q];
                    }
                }
                const double inv = 1.0 / static_cast<double>(config.inner_batch_size);
                for (double& v : acc.theta) v *= inv;
                for (double& v : acc.theta_e) v *= inv;
                state = apply_update(state, acc, config.learning_rate);
            }
        } catch (const NumericError& e) {
            throw DivergenceError(e.what(), state);
        }

        const auto t1 = std::chrono::steady_clock::now();
        const double ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.log.push_back({epoch, mean_matched, ms});
        log_info("epoch " + std::to_string(epoch) + " mean_matched_distance=" +
                 std::to_string(mean_matched) + " wallclock_ms=" +
                 std::to_string(ms));

        if (opts.checkpoint_every > 0 && opts.on_checkpoint &&
            epoch % opts.checkpoint_every == 0) {
            opts.on_checkpoint(epoch, state, result.lambda);
        }
    }

    result.state = std::move(state);
    return result;
}

} // namespace cimle
