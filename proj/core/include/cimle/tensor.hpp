#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cimle/rng.hpp"

namespace cimle {

/// Raised when a forward pass, distance, or loss produces a non-finite
/// value, which signals diverged training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-pixel class-label map with a one-hot view. Exactly one class is
/// active per pixel by construction: the layout stores 8-bit class ids and
/// exposes x^{i,j,p} as 0/1 through onehot().
class SemanticLayout {
public:
    SemanticLayout(int height, int width, int num_classes,
                   std::vector<std::uint8_t> labels);

    int height() const { return height_; }
    int width() const { return width_; }
    int num_classes() const { return num_classes_; }

    int class_at(int i, int j) const {
        return labels_[static_cast<std::size_t>(i) * width_ + j];
    }
    double onehot(int i, int j, int p) const {
        return class_at(i, j) == p ? 1.0 : 0.0;
    }
    const std::vector<std::uint8_t>& labels() const { return labels_; }

    bool operator==(const SemanticLayout& o) const = default;

    /// Content hash, stable across runs. Used to key evaluation draws to a
    /// layout rather than to its position in a list.
    std::uint64_t content_hash() const;

private:
    int height_;
    int width_;
    int num_classes_;
    std::vector<std::uint8_t> labels_;
};

/// Encode an integer label map as a SemanticLayout. Every id must lie in
/// [0, num_classes); a violation reports the offending pixel coordinate.
SemanticLayout one_hot_encode(const std::vector<int>& label_map, int height,
                              int width, int num_classes);

/// Recover the label map: argmax over the one-hot axis.
std::vector<int> argmax_decode(const SemanticLayout& layout);

/// Dense H x W x C real image, row-major (i * W + j) * C + c. Dataset
/// images live in [0,1]; generated images may leave the interval and are
/// clamped only at 8-bit export.
class ImageTensor {
public:
    ImageTensor(int height, int width, int channels);
    ImageTensor(int height, int width, int channels, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }

    double at(int i, int j, int c) const {
        return data_[(static_cast<std::size_t>(i) * width_ + j) * channels_ + c];
    }
    double& at(int i, int j, int c) {
        return data_[(static_cast<std::size_t>(i) * width_ + j) * channels_ + c];
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    std::size_t size() const { return data_.size(); }

    bool all_finite() const;
    bool operator==(const ImageTensor& o) const = default;

private:
    int height_;
    int width_;
    int channels_;
    std::vector<double> data_;
};

/// Low-dimensional latent noise vector fed to the noise encoder.
struct NoiseSeed {
    std::vector<double> values;

    int dim() const { return static_cast<int>(values.size()); }
    bool operator==(const NoiseSeed& o) const = default;
};

/// Full-resolution noise tensor, one value per (i, j, channel).
class NoiseField {
public:
    NoiseField(int height, int width, int channels);
    NoiseField(int height, int width, int channels, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }

    double at(int i, int j, int c) const {
        return values_[(static_cast<std::size_t>(i) * width_ + j) * channels_ + c];
    }
    double& at(int i, int j, int c) {
        return values_[(static_cast<std::size_t>(i) * width_ + j) * channels_ + c];
    }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool operator==(const NoiseField& o) const = default;

private:
    int height_;
    int width_;
    int channels_;
    std::vector<double> values_;
};

/// Per-pixel weight mask, entries expected in (0, 1].
struct PixelMask {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double at(int i, int j) const {
        return values[static_cast<std::size_t>(i) * width + j];
    }
};

/// How a raw NoiseField is populated: one draw per (i, j, c), or one draw
/// per channel broadcast over the spatial grid. Per-pixel is the default.
enum class NoiseMode { PerPixel, PerChannel };

NoiseSeed sample_noise_seed(Rng& rng, int dim);
NoiseField sample_noise_field(Rng& rng, int height, int width, int channels,
                              NoiseMode mode = NoiseMode::PerPixel);

/// A conditioning/target pair; datasets are flat lists of these.
struct Example {
    SemanticLayout layout;
    ImageTensor image;
};

using Dataset = std::vector<Example>;

} // namespace cimle
