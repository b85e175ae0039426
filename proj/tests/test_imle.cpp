#include <doctest.h>

#include <cmath>

#include "cimle/datasynth.hpp"
#include "cimle/eval.hpp"
#include "cimle/imle.hpp"
#include "oracles.hpp"

using namespace cimle;

TEST_SUITE_BEGIN("imle");

namespace {

GeneratorSpec tiny_spec(int classes) {
    GeneratorSpec spec;
    spec.input_classes = classes;
    spec.noise_channels = 2;
    spec.seed_dim = 2;
    spec.height = 1;
    spec.width = 2;
    spec.hidden = {4};
    spec.encoder_hidden = {3, 3};
    spec.refine_scales = 1;
    return spec;
}

ImageTensor random_image(Rng& rng, int h, int w) {
    ImageTensor img(h, w, 3);
    for (double& v : img.data()) v = rng.next_uniform();
    return img;
}

SemanticLayout constant_layout(int h, int w, int cls, int num_classes) {
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * w,
                                     static_cast<std::uint8_t>(cls));
    return SemanticLayout(h, w, num_classes, std::move(labels));
}

} // namespace

TEST_CASE("match: singleton, exact copy, ties, and the brute-force oracle") {
    Rng rng(7);
    const ImageTensor y = random_image(rng, 2, 3);
    const auto l2 = [](const ImageTensor& a, const ImageTensor& b) {
        return l2_distance(a, b);
    };

    const std::vector<ImageTensor> one{random_image(rng, 2, 3)};
    CHECK(match(y, one, l2).sample_index == 0);

    std::vector<ImageTensor> with_copy;
    for (int j = 0; j < 5; ++j) with_copy.push_back(random_image(rng, 2, 3));
    with_copy[2] = y;
    const MatchRecord exact = match(y, with_copy, l2, 42);
    CHECK(exact.sample_index == 2);
    CHECK(exact.distance == 0.0);
    CHECK(exact.example_index == 42);

    // Duplicated best candidate: the lower index wins.
    std::vector<ImageTensor> dup{with_copy[0], with_copy[0], with_copy[0]};
    CHECK(match(y, dup, l2).sample_index == 0);

    for (int trial = 0; trial < 100; ++trial) {
        const int m = 1 + static_cast<int>(rng.next_uniform() * 10);
        std::vector<ImageTensor> cands;
        std::vector<double> dists;
        for (int j = 0; j < m; ++j) {
            cands.push_back(random_image(rng, 2, 3));
            dists.push_back(l2_distance(y, cands.back()));
        }
        CHECK(match(y, cands, l2).sample_index == oracles::argmin_oracle(dists));
    }
}

TEST_CASE("conditional objective: degenerate case, monotonicity, oracle") {
    const GeneratorSpec spec = tiny_spec(2);
    Rng rng(11);
    const GeneratorState state = init_params(spec, rng);
    const L2Metric metric;

    std::vector<Example> batch;
    batch.push_back({constant_layout(1, 2, 0, 2), random_image(rng, 1, 2)});
    batch.push_back({constant_layout(1, 2, 1, 2), random_image(rng, 1, 2)});

    std::vector<std::vector<NoiseSeed>> seeds(2);
    seeds[0].push_back(sample_noise_seed(rng, 2));
    seeds[1].push_back(sample_noise_seed(rng, 2));

    // n=1, m=1 reduces to a single distance.
    const std::vector<Example> single{batch[0]};
    const std::vector<std::vector<NoiseSeed>> single_seed{seeds[0]};
    const double direct = metric.value(
        batch[0].image, generate(state, batch[0].layout, seeds[0][0]), nullptr);
    CHECK(conditional_objective(state, single, single_seed, metric) ==
          doctest::Approx(direct).epsilon(1e-14));

    // Extra candidates can only help.
    const double before = conditional_objective(state, batch, seeds, metric);
    auto extended = seeds;
    extended[0].push_back(extended[0][0]); // duplicate
    extended[1].push_back(sample_noise_seed(rng, 2));
    const double after = conditional_objective(state, batch, extended, metric);
    CHECK(after <= before + 1e-14);

    // Brute-force re-evaluation.
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::vector<NoiseSeed>> s(2);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 3; ++j) s[i].push_back(sample_noise_seed(rng, 2));
        }
        double total = 0.0;
        for (int i = 0; i < 2; ++i) {
            double best = 1e300;
            for (int j = 0; j < 3; ++j) {
                best = std::min(best, oracles::l2_oracle(
                                          batch[i].image,
                                          generate(state, batch[i].layout, s[i][j])));
            }
            total += best;
        }
        total /= 2.0;
        CHECK(oracles::rel_err(conditional_objective(state, batch, s, metric), total) <
              1e-12);
    }
}

TEST_CASE("unconditional objective shares one pool across targets") {
    const GeneratorSpec spec = tiny_spec(2);
    Rng rng(13);
    const GeneratorState state = init_params(spec, rng);
    const L2Metric metric;
    const SemanticLayout shared = constant_layout(1, 2, 0, 2);

    std::vector<NoiseSeed> pool;
    for (int j = 0; j < 4; ++j) pool.push_back(sample_noise_seed(rng, 2));
    std::vector<ImageTensor> targets;
    for (int i = 0; i < 3; ++i) targets.push_back(random_image(rng, 1, 2));

    const std::vector<ImageTensor> one_target{targets[0]};
    double best = 1e300;
    for (const NoiseSeed& z : pool) {
        best = std::min(best,
                        oracles::l2_oracle(targets[0], generate(state, shared, z)));
    }
    CHECK(unconditional_objective(state, shared, pool, one_target, metric) ==
          doctest::Approx(best).epsilon(1e-12));

    const double m_val = unconditional_objective(state, shared, pool, targets, metric);
    auto pool2 = pool;
    pool2.push_back(sample_noise_seed(rng, 2));
    CHECK(unconditional_objective(state, shared, pool2, targets, metric) <=
          m_val + 1e-14);

    double total = 0.0;
    for (const ImageTensor& y : targets) {
        double b = 1e300;
        for (const NoiseSeed& z : pool) {
            b = std::min(b, oracles::l2_oracle(y, generate(state, shared, z)));
        }
        total += b;
    }
    CHECK(oracles::rel_err(m_val, total / 3.0) < 1e-12);
}

TEST_CASE("every example gets exactly one match record") {
    const GeneratorSpec spec = tiny_spec(2);
    Rng rng(17);
    const GeneratorState state = init_params(spec, rng);
    const auto l2 = [](const ImageTensor& a, const ImageTensor& b) {
        return l2_distance(a, b);
    };
    std::vector<int> matched_count(6, 0);
    for (int i = 0; i < 6; ++i) {
        const SemanticLayout x = constant_layout(1, 2, i % 2, 2);
        const ImageTensor y = random_image(rng, 1, 2);
        std::vector<ImageTensor> cands;
        for (int j = 0; j < 4; ++j) {
            cands.push_back(generate(state, x, sample_noise_seed(rng, 2)));
        }
        const MatchRecord rec = match(y, cands, l2, i);
        CHECK(rec.sample_index >= 0);
        CHECK(rec.sample_index < 4);
        ++matched_count[rec.example_index];
    }
    for (int c : matched_count) CHECK(c == 1);
}

TEST_CASE("a small inner step descends, matching the first-order oracle") {
    const GeneratorSpec spec = tiny_spec(2);
    Rng rng(19);
    GeneratorState state = init_params(spec, rng);
    const L2Metric metric;

    std::vector<Example> batch;
    std::vector<NoiseSeed> matched;
    for (int i = 0; i < 3; ++i) {
        const SemanticLayout x = constant_layout(1, 2, i % 2, 2);
        const ImageTensor y = random_image(rng, 1, 2);
        std::vector<ImageTensor> cands;
        std::vector<NoiseSeed> seeds;
        for (int j = 0; j < 4; ++j) {
            seeds.push_back(sample_noise_seed(rng, 2));
            cands.push_back(generate(state, x, seeds.back()));
        }
        const MatchRecord rec = match(
            y, cands,
            [&](const ImageTensor& a, const ImageTensor& b) {
                return metric.value(a, b, nullptr);
            },
            i);
        batch.push_back({x, y});
        matched.push_back(seeds[rec.sample_index]);
    }

    auto total_loss = [&](const GeneratorState& s) {
        double sum = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            sum += metric.value(batch[i].image,
                                generate(s, batch[i].layout, matched[i]), nullptr);
        }
        return sum;
    };

    GeneratorGrad grad;
    grad.theta.assign(state.theta.size(), 0.0);
    grad.theta_e.assign(state.theta_e.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ImageTensor out = generate(state, batch[i].layout, matched[i]);
        const ImageTensor up = metric.grad(batch[i].image, out, nullptr);
        const GeneratorGrad g = backward_full(state, batch[i].layout, matched[i], up);
        for (std::size_t q = 0; q < grad.theta.size(); ++q) grad.theta[q] += g.theta[q];
        for (std::size_t q = 0; q < grad.theta_e.size(); ++q) {
            grad.theta_e[q] += g.theta_e[q];
        }
    }

    double gnorm2 = 0.0;
    for (double v : grad.theta) gnorm2 += v * v;
    for (double v : grad.theta_e) gnorm2 += v * v;
    CHECK(gnorm2 >= -1e-12); // descent direction, up to the stated tolerance

    const double eta = 1e-6;
    const double before = total_loss(state);
    const double after = total_loss(apply_update(state, grad, eta));
    CHECK(after <= before + 1e-12);
    // First-order model: (before - after) / eta -> |grad|^2.
    CHECK(oracles::rel_err((before - after) / eta, gnorm2) < 0.05);
}

TEST_CASE("train: empty loop, determinism, and the large-batch regime") {
    GmmTaskSpec task;
    task.num_conditions = 2;
    task.modes_per_condition = 2;
    task.samples_per_condition = 4;
    Rng drng(23);
    const GmmDataset ds = gen_gmm_dataset(task, drng);

    const GeneratorSpec spec = tiny_spec(2);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.batch_size = 4;
    cfg.samples_per_example = 2;
    cfg.inner_steps = 2;
    cfg.inner_batch_size = 2;
    cfg.learning_rate = 1e-4;
    cfg.distance = TrainConfig::Distance::L2;
    cfg.seed = 5;

    const TrainResult empty1 = train(ds.data, spec, cfg, Rng(cfg.seed));
    CHECK(empty1.log.empty());
    TrainConfig cfg_other = cfg;
    cfg_other.batch_size = 7; // irrelevant at E=0
    const TrainResult empty2 = train(ds.data, spec, cfg_other, Rng(cfg.seed));
    CHECK(empty1.state == empty2.state);

    cfg.epochs = 3;
    const TrainResult a = train(ds.data, spec, cfg, Rng(cfg.seed));
    const TrainResult b = train(ds.data, spec, cfg, Rng(cfg.seed));
    REQUIRE(a.log.size() == 3);
    CHECK(a.state == b.state);
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        CHECK(a.log[e].mean_matched_distance == b.log[e].mean_matched_distance);
    }

    // |S|=400, m=10, K=10000, |S~|=1, eta=1e-5 drives the full loop shape,
    // with the batch far larger than the dataset.
    TrainConfig large;
    large.epochs = 1;
    large.batch_size = 400;
    large.samples_per_example = 10;
    large.inner_steps = 10000;
    large.inner_batch_size = 1;
    large.learning_rate = 1e-5;
    large.distance = TrainConfig::Distance::L2;
    large.seed = 9;
    const TrainResult pr = train(ds.data, spec, large, Rng(large.seed));
    REQUIRE(pr.log.size() == 1);
    CHECK(std::isfinite(pr.log[0].mean_matched_distance));
    CHECK(pr.state.theta != empty1.state.theta); // 10000 steps moved it
}

TEST_CASE("train rejects invalid configs and reports divergence") {
    TrainConfig bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.learning_rate = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.learning_rate = 1.0;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    GmmTaskSpec task;
    task.num_conditions = 2;
    task.modes_per_condition = 2;
    task.samples_per_condition = 4;
    Rng drng(29);
    const GmmDataset ds = gen_gmm_dataset(task, drng);

    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 4;
    cfg.samples_per_example = 2;
    cfg.inner_steps = 5;
    cfg.inner_batch_size = 2;
    cfg.learning_rate = 1e25; // guaranteed blow-up
    cfg.distance = TrainConfig::Distance::L2;
    cfg.seed = 31;
    try {
        train(ds.data, tiny_spec(2), cfg, Rng(cfg.seed));
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.diagnostic.theta.size() == tiny_spec(2).main_param_count());
    }
}

TEST_CASE("more candidates beat unimodal regression on mode coverage") {
    GmmTaskSpec task;
    task.num_conditions = 2;
    task.modes_per_condition = 2;
    task.samples_per_condition = 24;
    task.mode_std = 0.02;
    Rng drng(37);
    const GmmDataset ds = gen_gmm_dataset(task, drng);

    const GeneratorSpec spec = tiny_spec(2);
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 16;
    cfg.samples_per_example = 8;
    cfg.inner_steps = 25;
    cfg.inner_batch_size = 6;
    cfg.learning_rate = 0.05;
    cfg.distance = TrainConfig::Distance::L2;
    cfg.seed = 41;

    TrainConfig ablation = cfg;
    ablation.samples_per_example = 1;

    const TrainResult multi = train(ds.data, spec, cfg, Rng(cfg.seed));
    const TrainResult uni = train(ds.data, spec, ablation, Rng(cfg.seed));

    double cov_multi = 0.0, cov_uni = 0.0;
    for (int c = 0; c < task.num_conditions; ++c) {
        Rng ra(50 + c), rb(50 + c);
        cov_multi += mode_coverage(multi.state, gmm_condition_layout(ds.spec, c),
                                   ds.spec.centres[c], 3.0 * task.mode_std, 64, ra);
        cov_uni += mode_coverage(uni.state, gmm_condition_layout(ds.spec, c),
                                 ds.spec.centres[c], 3.0 * task.mode_std, 64, rb);
    }
    CHECK(cov_multi > cov_uni);
}

TEST_SUITE_END();
