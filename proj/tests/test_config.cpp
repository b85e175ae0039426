#include <doctest.h>

#include "cimle/config.hpp"

using namespace cimle;

TEST_SUITE_BEGIN("config");

TEST_CASE("parsing, defaults, comments, and overrides") {
    const std::string text =
        "# layout toy run\n"
        "task = layout\n"
        "seed = 42\n"
        "epochs = 12\n"
        "batch_size = 8\n"
        "samples_per_example = 5\n"
        "learning_rate = 0.01\n"
        "rebalance = on\n"
        "distance = l2\n"
        "hidden = 6,6\n"
        "layout.num_classes = 4   # inline comment\n"
        "\n";
    const ExperimentConfig cfg = ExperimentConfig::parse_string(text);
    CHECK(cfg.task == "layout");
    CHECK(cfg.train.seed == 42);
    CHECK(cfg.train.epochs == 12);
    CHECK(cfg.train.batch_size == 8);
    CHECK(cfg.train.samples_per_example == 5);
    CHECK(cfg.train.learning_rate == 0.01);
    CHECK(cfg.train.rebalance);
    CHECK(cfg.train.distance == TrainConfig::Distance::L2);
    CHECK(cfg.hidden == std::vector<int>{6, 6});
    CHECK(cfg.layout.num_classes == 4);
    // untouched keys keep their defaults
    CHECK(cfg.noise_channels == 10);
    CHECK(cfg.train.inner_steps == 1);
    cfg.validate();
}

TEST_CASE("unknown keys and malformed lines are rejected with line numbers") {
    try {
        ExperimentConfig::parse_string("task = layout\nbogus_key = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }

    try {
        ExperimentConfig::parse_string("\n\nepochs ten\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 3);
    }

    try {
        ExperimentConfig::parse_string("epochs = ten\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 1);
    }

    CHECK_THROWS_AS(ExperimentConfig::parse_string("distance = cosine\n"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse_string("rebalance = maybe\n"),
                    ConfigError);
}

TEST_CASE("validation catches bad hyperparameters") {
    ExperimentConfig cfg;
    cfg.train.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    ExperimentConfig cfg2;
    cfg2.task = "gmm";
    cfg2.refine_scales = 2; // 1x2 resolution cannot halve
    CHECK_THROWS_AS(cfg2.validate(), ConfigError);
    cfg2.refine_scales = 1;
    cfg2.validate();
}

TEST_CASE("canonical snapshot round-trips exactly") {
    ExperimentConfig cfg;
    cfg.task = "gmm";
    cfg.train.seed = 31337;
    cfg.train.learning_rate = 3.0e-4;
    cfg.train.epochs = 77;
    cfg.hidden = {5, 7};
    cfg.refine_scales = 1;
    cfg.layout.mode_bias = 0.875;
    cfg.out_dir = "runs/demo";

    const std::string snap = cfg.canonical();
    const ExperimentConfig back = ExperimentConfig::parse_string(snap);
    CHECK(back.canonical() == snap);
    CHECK(back.train.seed == cfg.train.seed);
    CHECK(back.train.learning_rate == cfg.train.learning_rate);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.out_dir == cfg.out_dir);
}

TEST_CASE("generator spec resolves resolution from the task") {
    ExperimentConfig cfg;
    cfg.task = "layout";
    cfg.layout.height = 8;
    cfg.layout.width = 16;
    cfg.layout.num_classes = 6;
    const GeneratorSpec gs = cfg.generator_spec();
    CHECK(gs.height == 8);
    CHECK(gs.width == 16);
    CHECK(gs.input_classes == 6);

    cfg.task = "gmm";
    cfg.gmm.height = 1;
    cfg.gmm.width = 2;
    cfg.gmm.num_conditions = 4;
    const GeneratorSpec gg = cfg.generator_spec();
    CHECK(gg.height == 1);
    CHECK(gg.width == 2);
    CHECK(gg.input_classes == 4);
}

TEST_SUITE_END();
