#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimle/rng.hpp"
#include "cimle/tensor.hpp"

namespace cimle {

/// Architecture hyperparameters. A GeneratorSpec fully determines the
/// parameter count, so it travels with every state and checkpoint.
///
/// The main net is a downsample-free stack of 3x3 convolutions with leaky
/// rectifiers, refined at one or two scales: with refine_scales == 2 the
/// stack first runs on a 2x area-downsampled copy of the input, and its
/// output is nearest-upsampled and concatenated to the full-resolution
/// input of the finest stack. The final layer is affine (no squashing).
/// The noise encoder is a 3-layer convolutional net mapping the layout
/// plus a spatially broadcast low-dimensional seed to a full-size noise
/// field that is concatenated to the input channel-wise.
struct GeneratorSpec {
    int input_classes = 2;
    int noise_channels = 10;
    int seed_dim = 4;
    int height = 16;
    int width = 32;
    std::vector<int> hidden = {8};          // trunk widths, reused per scale
    std::vector<int> encoder_hidden = {8, 8};
    int refine_scales = 2;                  // 1 or 2
    NoiseMode noise_mode = NoiseMode::PerPixel;

    void validate() const;
    std::size_t main_param_count() const;
    std::size_t encoder_param_count() const;

    bool operator==(const GeneratorSpec& o) const = default;
};

struct GeneratorState {
    GeneratorSpec spec;
    std::vector<double> theta;    // main net, layer-major (weights then bias)
    std::vector<double> theta_e;  // noise encoder

    bool operator==(const GeneratorState& o) const = default;
};

/// Flat gradient over both parameter vectors and the seed path.
struct GeneratorGrad {
    std::vector<double> theta;
    std::vector<double> theta_e;
    NoiseSeed seed;
};

/// Fan-in-scaled normal weights, zero biases. Deterministic given the rng.
GeneratorState init_params(const GeneratorSpec& spec, Rng& rng);

/// z' = E(x, seed): full-size noise field on the low-dimensional manifold
/// spanned by the seed.
NoiseField noise_encode(const GeneratorState& state, const SemanticLayout& x,
                        const NoiseSeed& seed);

/// y = T_theta(x, z). Pure in all arguments; throws NumericError if any
/// intermediate is non-finite.
ImageTensor forward(const GeneratorState& state, const SemanticLayout& x,
                    const NoiseField& z);

/// The composite sampler T_theta(x, E(x, seed)).
ImageTensor generate(const GeneratorState& state, const SemanticLayout& x,
                     const NoiseSeed& seed);

struct MainBackward {
    std::vector<double> grad_theta;
    NoiseField grad_noise;
};

/// Reverse-mode gradient of <upstream, forward(state, x, z)> with respect
/// to theta and z.
MainBackward backward(const GeneratorState& state, const SemanticLayout& x,
                      const NoiseField& z, const ImageTensor& upstream);

struct EncoderBackward {
    std::vector<double> grad_theta_e;
    NoiseSeed grad_seed;
};

/// Reverse-mode gradient of <upstream_field, noise_encode(state, x, seed)>.
EncoderBackward encoder_backward(const GeneratorState& state,
                                 const SemanticLayout& x, const NoiseSeed& seed,
                                 const NoiseField& upstream_field);

/// Gradient of <upstream, generate(state, x, seed)> over (theta, theta_e,
/// seed): the full chain through the noise encoder.
GeneratorGrad backward_full(const GeneratorState& state, const SemanticLayout& x,
                            const NoiseSeed& seed, const ImageTensor& upstream);

/// Plain gradient-descent step theta <- theta - eta * grad. Rejects
/// non-finite gradient entries.
GeneratorState apply_update(const GeneratorState& state, const GeneratorGrad& grad,
                            double eta);

/// Checkpoint container ("CIMLckpt" magic, spec header, little-endian
/// 64-bit parameters, trailing CRC-32). The training metric's extractor
/// seed and calibrated layer weights ride along for reproducibility.
struct Checkpoint {
    GeneratorState state;
    std::uint64_t metric_seed = 0;
    std::vector<double> lambda;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path); // CorruptFileError on damage

} // namespace cimle
