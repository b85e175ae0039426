#pragma once

#include <stdexcept>
#include <string>

#include "cimle/datasynth.hpp"
#include "cimle/generator.hpp"
#include "cimle/imle.hpp"

namespace cimle {

/// Configuration problem: bad syntax, unknown key, bad value, or failed
/// validation. Carries the offending line (0 when not line-anchored).
/// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    int line;

    explicit ConfigError(const std::string& msg, int line_ = 0)
        : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg
                                       : msg),
          line(line_) {}
};

/// The whole experiment in one flat key=value file: task choice, training
/// hyperparameters, generator architecture, metric seeds, and the task
/// dataset knobs. Unknown keys are rejected. canonical() renders the
/// resolved configuration in a fixed key order; parsing it back
/// reproduces the run with no other inputs.
struct ExperimentConfig {
    std::string task = "layout"; // "gmm" | "layout"
    TrainConfig train;

    int noise_channels = 10;
    int seed_dim = 4;
    std::vector<int> hidden = {8};
    std::vector<int> encoder_hidden = {8, 8};
    int refine_scales = 2;
    NoiseMode noise_mode = NoiseMode::PerPixel;

    std::uint64_t metric_seed = 17;
    std::uint64_t eval_metric_seed = 9001;
    std::string out_dir = "out";
    int checkpoint_every = 0;

    GmmTaskSpec gmm;
    LayoutTaskSpec layout;

    void validate() const; // throws ConfigError

    /// Generator spec with resolution and input classes resolved from the
    /// task's dataset parameters.
    GeneratorSpec generator_spec() const;

    int task_height() const;
    int task_width() const;
    int task_classes() const;

    std::string canonical() const;

    static ExperimentConfig parse_string(const std::string& text);
    static ExperimentConfig parse_file(const std::string& path);
};

} // namespace cimle
