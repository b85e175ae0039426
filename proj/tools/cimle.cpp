// Experiment harness: training runs, sampling, latent interpolation,
// evaluation protocols, and rebalancing statistics, all deterministic
// given (config, seed).
//
// Exit codes: 0 ok, 2 configuration problem, 3 training divergence
// (a diagnostic checkpoint is written), 4 corrupt input file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cimle/config.hpp"
#include "cimle/datasynth.hpp"
#include "cimle/eval.hpp"
#include "cimle/imle.hpp"
#include "cimle/log.hpp"
#include "cimle/rebalance.hpp"
#include "cimle/serialize.hpp"

namespace fs = std::filesystem;
using namespace cimle;

namespace {

// Latent-seed derivation shared by `sample` and `interpolate`, so the
// first interpolation frame is byte-identical to sampling at seed_a.
constexpr std::uint64_t kTagSample = 31;
constexpr std::uint64_t kTagDataset = 32;
constexpr std::uint64_t kTagCoverage = 33;

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

NoiseSeed derive_seed(std::uint64_t user_seed, int index, int dim) {
    Rng rng = Rng(user_seed).fork(kTagSample, static_cast<std::uint64_t>(index));
    return sample_noise_seed(rng, dim);
}

struct TrainArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    int workers = 0;
};

struct SampleArgs {
    std::string layout_path;
    std::string checkpoint;
    int count = 9;
    std::uint64_t seed = 0;
    std::string out = ".";
};

struct InterpolateArgs {
    std::string layout_path;
    std::string checkpoint;
    std::uint64_t seed_a = 0;
    std::uint64_t seed_b = 1;
    int steps = 8;
    std::string out = ".";
};

struct EvalArgs {
    std::string run_dir;
    std::string checkpoint;
    int pairs = 40;
    int inputs = 100;
    double eps = 0.0; // 0 = 3 * mode_std
    int samples = 200;
    std::uint64_t seed = 0;
    std::string out = ".";
};

struct StatsArgs {
    std::string dataset_path;
    std::string out; // empty = stdout
};

void write_train_log_csv(const std::string& path,
                         const std::vector<EpochStats>& log) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "epoch,mean_matched_distance\n";
    for (const EpochStats& e : log) {
        os << e.epoch << "," << fmt_real(e.mean_matched_distance) << "\n";
    }
}

Dataset generate_task_dataset(const ExperimentConfig& cfg, GmmDataset* gmm_out,
                              LayoutDataset* layout_out) {
    Rng data_rng = Rng(cfg.train.seed).fork(kTagDataset);
    if (cfg.task == "gmm") {
        GmmDataset ds = gen_gmm_dataset(cfg.gmm, data_rng);
        Dataset data = ds.data;
        if (gmm_out != nullptr) *gmm_out = std::move(ds);
        return data;
    }
    LayoutDataset ds = gen_layout_dataset(cfg.layout, data_rng);
    Dataset data = ds.data;
    if (layout_out != nullptr) *layout_out = std::move(ds);
    return data;
}

int run_train(const TrainArgs& args) {
    ExperimentConfig cfg = ExperimentConfig::parse_file(args.config_path);
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.out) cfg.out_dir = *args.out;
    cfg.validate();

    fs::create_directories(cfg.out_dir);
    fs::create_directories(fs::path(cfg.out_dir) / "layouts");

    GmmDataset gmm_ds;
    LayoutDataset layout_ds;
    const Dataset dataset = generate_task_dataset(cfg, &gmm_ds, &layout_ds);

    save_dataset_file((fs::path(cfg.out_dir) / "dataset.bin").string(), dataset);
    if (cfg.task == "gmm") {
        write_gmm_metadata_csv((fs::path(cfg.out_dir) / "metadata.csv").string(),
                               gmm_ds);
        for (int c = 0; c < cfg.gmm.num_conditions; ++c) {
            save_layout_file((fs::path(cfg.out_dir) / "layouts" /
                              ("layout_" + zero_pad(c, 3) + ".bin"))
                                 .string(),
                             gmm_condition_layout(gmm_ds.spec, c));
        }
    } else {
        write_layout_metadata_csv((fs::path(cfg.out_dir) / "metadata.csv").string(),
                                  layout_ds);
        for (std::size_t l = 0; l < layout_ds.distinct_layouts.size(); ++l) {
            save_layout_file((fs::path(cfg.out_dir) / "layouts" /
                              ("layout_" + zero_pad(static_cast<int>(l), 3) + ".bin"))
                                 .string(),
                             layout_ds.distinct_layouts[l]);
        }
    }

    {
        std::ofstream os(fs::path(cfg.out_dir) / "config.resolved");
        if (!os) throw std::runtime_error("cannot write config snapshot");
        os << cfg.canonical();
    }

    TrainOptions opts;
    opts.metric_seed = cfg.metric_seed;
    opts.workers = args.workers;
    opts.checkpoint_every = cfg.checkpoint_every;
    opts.on_checkpoint = [&](int epoch, const GeneratorState& state,
                             const LayerWeights& lambda) {
        save_checkpoint((fs::path(cfg.out_dir) /
                         ("checkpoint_epoch" + zero_pad(epoch, 6) + ".ckpt"))
                            .string(),
                        Checkpoint{state, cfg.metric_seed, lambda.lambda});
    };

    try {
        TrainResult result = train(dataset, cfg.generator_spec(), cfg.train,
                                   Rng(cfg.train.seed), opts);
        write_train_log_csv((fs::path(cfg.out_dir) / "log.csv").string(),
                            result.log);
        save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.ckpt").string(),
                        Checkpoint{result.state, result.metric_seed,
                                   result.lambda.lambda});
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        save_checkpoint((fs::path(cfg.out_dir) / "diagnostic.ckpt").string(),
                        Checkpoint{e.diagnostic, cfg.metric_seed, {}});
        return 3;
    }
    return 0;
}

int run_sample(const SampleArgs& args) {
    if (args.count < 0) throw ConfigError("--count must be >= 0");
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const SemanticLayout layout = load_layout_file(args.layout_path);
    if (args.count == 0) return 0;
    fs::create_directories(args.out);

    std::vector<ImageTensor> images;
    images.reserve(args.count);
    for (int i = 0; i < args.count; ++i) {
        const NoiseSeed z = derive_seed(args.seed, i, ckpt.state.spec.seed_dim);
        images.push_back(generate(ckpt.state, layout, z));
        write_ppm((fs::path(args.out) / ("sample_" + zero_pad(i, 3) + ".ppm"))
                      .string(),
                  images.back());
    }
    write_ppm((fs::path(args.out) / "mosaic.ppm").string(), make_mosaic(images));
    return 0;
}

int run_interpolate(const InterpolateArgs& args) {
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const SemanticLayout layout = load_layout_file(args.layout_path);
    const int dim = ckpt.state.spec.seed_dim;
    const NoiseSeed za = derive_seed(args.seed_a, 0, dim);
    const NoiseSeed zb = derive_seed(args.seed_b, 0, dim);
    const std::vector<ImageTensor> frames =
        interpolate(ckpt.state, layout, za, zb, args.steps);
    fs::create_directories(args.out);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        write_ppm((fs::path(args.out) /
                   ("frame_" + zero_pad(static_cast<int>(t), 3) + ".ppm"))
                      .string(),
                  frames[t]);
    }
    return 0;
}

int run_eval(const EvalArgs& args) {
    const fs::path run_dir(args.run_dir);
    const fs::path cfg_path = run_dir / "config.resolved";
    const fs::path data_path = run_dir / "dataset.bin";
    if (!fs::exists(cfg_path)) {
        throw ConfigError("run directory has no config.resolved: " + args.run_dir);
    }
    if (!fs::exists(data_path)) {
        throw ConfigError("missing dataset: " + data_path.string());
    }
    ExperimentConfig cfg = ExperimentConfig::parse_file(cfg_path.string());
    const std::string ckpt_path = args.checkpoint.empty()
                                      ? (run_dir / "checkpoint.ckpt").string()
                                      : args.checkpoint;
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset dataset = load_dataset_file(data_path.string());
    if (dataset.empty()) throw ConfigError("dataset is empty");
    fs::create_directories(args.out);

    // Distinct inputs in first-appearance order, capped at --inputs.
    std::vector<SemanticLayout> inputs;
    {
        std::map<std::uint64_t, bool> seen;
        for (const Example& ex : dataset) {
            const std::uint64_t h = ex.layout.content_hash();
            if (seen.contains(h)) continue;
            seen[h] = true;
            inputs.push_back(ex.layout);
            if (static_cast<int>(inputs.size()) >= args.inputs) break;
        }
    }

    // Held-out metric: a pyramid from the eval seed with unit weights.
    FeatureExtractor fe = make_default_extractor(
        cfg.eval_metric_seed, ckpt.state.spec.height, ckpt.state.spec.width);
    LayerWeights ones;
    ones.lambda.assign(fe.layers(), 1.0);
    PerceptualMetric metric(std::move(fe), ones);

    const DiversityReport report =
        diversity_score(ckpt.state, inputs, args.pairs, metric,
                        cfg.eval_metric_seed, Rng(args.seed));
    {
        std::ofstream os(fs::path(args.out) / "diversity.csv");
        if (!os) throw std::runtime_error("cannot write diversity.csv");
        os << "input_index,pairs_per_input,metric_seed,mean_pairwise_distance\n";
        for (std::size_t i = 0; i < report.per_input_mean.size(); ++i) {
            os << i << "," << report.pairs_per_input << "," << report.metric_seed
               << "," << fmt_real(report.per_input_mean[i]) << "\n";
        }
        os << "global," << report.pairs_per_input << "," << report.metric_seed
           << "," << fmt_real(report.global_mean) << "\n";
    }

    if (cfg.task == "gmm") {
        // True modes come from the seeded dataset generation path.
        Rng data_rng = Rng(cfg.train.seed).fork(kTagDataset);
        const GmmDataset gmm_ds = gen_gmm_dataset(cfg.gmm, data_rng);
        const double eps = args.eps > 0.0 ? args.eps : 3.0 * cfg.gmm.mode_std;
        std::ofstream os(fs::path(args.out) / "coverage.csv");
        if (!os) throw std::runtime_error("cannot write coverage.csv");
        os << "condition,modes,samples,eps,coverage\n";
        double mean_cov = 0.0;
        for (int c = 0; c < gmm_ds.spec.num_conditions; ++c) {
            Rng cov_rng = Rng(args.seed).fork(kTagCoverage,
                                              static_cast<std::uint64_t>(c));
            const double cov = mode_coverage(
                ckpt.state, gmm_condition_layout(gmm_ds.spec, c),
                gmm_ds.spec.centres[c], eps, args.samples, cov_rng);
            mean_cov += cov;
            os << c << "," << gmm_ds.spec.modes_per_condition << "," << args.samples
               << "," << fmt_real(eps) << "," << fmt_real(cov) << "\n";
        }
        mean_cov /= gmm_ds.spec.num_conditions;
        os << "mean," << gmm_ds.spec.modes_per_condition << "," << args.samples
           << "," << fmt_real(eps) << "," << fmt_real(mean_cov) << "\n";
    }
    return 0;
}

int run_stats(const StatsArgs& args) {
    if (!fs::exists(args.dataset_path)) {
        throw ConfigError("missing dataset: " + args.dataset_path);
    }
    const Dataset dataset = load_dataset_file(args.dataset_path);
    if (dataset.empty()) throw ConfigError("dataset is empty");
    const RarityTable table = rarity_scores(dataset);

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!args.out.empty()) {
        file.open(args.out, std::ios::trunc);
        if (!file) throw std::runtime_error("cannot write " + args.out);
        os = &file;
    }
    *os << "category,image_index,avg_r,avg_g,avg_b,density,rarity\n";
    for (int p = 0; p < table.num_classes; ++p) {
        for (const auto& [k, c] : table.colors[p]) {
            const double density = table.kde[p]->density(c);
            *os << p << "," << k << "," << fmt_real(c[0]) << "," << fmt_real(c[1])
                << "," << fmt_real(c[2]) << "," << fmt_real(density) << ","
                << fmt_real(table.rarity[p][k]) << "\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional IMLE experiment harness"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "run the training loop");
    train_cmd->add_option("--config", train_args.config_path, "experiment config file")
        ->required();
    train_cmd->add_option("--seed", train_args.seed, "override the config seed");
    train_cmd->add_option("--out", train_args.out, "override the output directory");
    train_cmd->add_option("--workers", train_args.workers,
                          "worker threads (0 = all cores)");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "generate samples for a layout");
    sample_cmd->add_option("layout", sample_args.layout_path, "layout container file")
        ->required();
    sample_cmd->add_option("--checkpoint", sample_args.checkpoint, "model checkpoint")
        ->required();
    sample_cmd->add_option("--count", sample_args.count, "number of samples");
    sample_cmd->add_option("--seed", sample_args.seed, "sampling seed");
    sample_cmd->add_option("--out", sample_args.out, "output directory");

    InterpolateArgs interp_args;
    auto* interp_cmd =
        app.add_subcommand("interpolate", "walk the line between two latent seeds");
    interp_cmd->add_option("layout", interp_args.layout_path, "layout container file")
        ->required();
    interp_cmd->add_option("--checkpoint", interp_args.checkpoint, "model checkpoint")
        ->required();
    interp_cmd->add_option("--seed-a", interp_args.seed_a, "first endpoint seed");
    interp_cmd->add_option("--seed-b", interp_args.seed_b, "second endpoint seed");
    interp_cmd->add_option("--steps", interp_args.steps, "number of frames (>= 2)");
    interp_cmd->add_option("--out", interp_args.out, "output directory");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "diversity / mode-coverage reports");
    eval_cmd->add_option("run_dir", eval_args.run_dir, "training output directory")
        ->required();
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint,
                         "checkpoint (default: run_dir/checkpoint.ckpt)");
    eval_cmd->add_option("--pairs", eval_args.pairs, "pairs per input");
    eval_cmd->add_option("--inputs", eval_args.inputs, "max distinct inputs");
    eval_cmd->add_option("--eps", eval_args.eps,
                         "coverage radius (default 3 * mode_std)");
    eval_cmd->add_option("--samples", eval_args.samples, "coverage sample count");
    eval_cmd->add_option("--seed", eval_args.seed, "evaluation seed");
    eval_cmd->add_option("--out", eval_args.out, "report directory");

    StatsArgs stats_args;
    auto* stats_cmd =
        app.add_subcommand("rebalance-stats", "per-category rarity statistics");
    stats_cmd->add_option("dataset", stats_args.dataset_path, "dataset container file")
        ->required();
    stats_cmd->add_option("--out", stats_args.out, "CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return run_train(train_args);
        if (sample_cmd->parsed()) return run_sample(sample_args);
        if (interp_cmd->parsed()) return run_interpolate(interp_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (stats_cmd->parsed()) return run_stats(stats_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CorruptFileError& e) {
        std::cerr << "corrupt file: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
