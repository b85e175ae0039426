#include "cimle/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cimle {

SemanticLayout::SemanticLayout(int height, int width, int num_classes,
                               std::vector<std::uint8_t> labels)
    : height_(height), width_(width), num_classes_(num_classes),
      labels_(std::move(labels)) {
    if (height < 1 || width < 1 || num_classes < 1) {
        throw std::invalid_argument("SemanticLayout: dimensions must be >= 1");
    }
    if (num_classes > 255) {
        throw std::invalid_argument("SemanticLayout: at most 255 classes");
    }
    if (labels_.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("SemanticLayout: label buffer size mismatch");
    }
    for (std::size_t k = 0; k < labels_.size(); ++k) {
        if (labels_[k] >= num_classes) {
            throw std::invalid_argument(
                "SemanticLayout: class id out of range at pixel (" +
                std::to_string(k / width) + ", " + std::to_string(k % width) + ")");
        }
    }
}

std::uint64_t SemanticLayout::content_hash() const {
    // FNV-1a over dims and labels.
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto feed = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xFF;
            h *= 0x100000001B3ull;
        }
    };
    feed(static_cast<std::uint64_t>(height_));
    feed(static_cast<std::uint64_t>(width_));
    feed(static_cast<std::uint64_t>(num_classes_));
    for (std::uint8_t v : labels_) {
        h ^= v;
        h *= 0x100000001B3ull;
    }
    return h;
}

SemanticLayout one_hot_encode(const std::vector<int>& label_map, int height,
                              int width, int num_classes) {
    if (height < 1 || width < 1 || num_classes < 1) {
        throw std::invalid_argument("one_hot_encode: dimensions must be >= 1");
    }
    if (label_map.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("one_hot_encode: label map size mismatch");
    }
    std::vector<std::uint8_t> labels(label_map.size());
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const int id = label_map[static_cast<std::size_t>(i) * width + j];
            if (id < 0 || id >= num_classes) {
                throw std::invalid_argument(
                    "one_hot_encode: class id " + std::to_string(id) +
                    " out of range at pixel (" + std::to_string(i) + ", " +
                    std::to_string(j) + ")");
            }
            labels[static_cast<std::size_t>(i) * width + j] =
                static_cast<std::uint8_t>(id);
        }
    }
    return SemanticLayout(height, width, num_classes, std::move(labels));
}

std::vector<int> argmax_decode(const SemanticLayout& layout) {
    std::vector<int> ids(static_cast<std::size_t>(layout.height()) * layout.width());
    for (int i = 0; i < layout.height(); ++i) {
        for (int j = 0; j < layout.width(); ++j) {
            int best = 0;
            double best_v = layout.onehot(i, j, 0);
            for (int p = 1; p < layout.num_classes(); ++p) {
                const double v = layout.onehot(i, j, p);
                if (v > best_v) {
                    best_v = v;
                    best = p;
                }
            }
            ids[static_cast<std::size_t>(i) * layout.width() + j] = best;
        }
    }
    return ids;
}

ImageTensor::ImageTensor(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels),
      data_(static_cast<std::size_t>(height) * width * channels, 0.0) {
    if (height < 1 || width < 1 || channels < 1) {
        throw std::invalid_argument("ImageTensor: dimensions must be >= 1");
    }
}

ImageTensor::ImageTensor(int height, int width, int channels,
                         std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 1 || width < 1 || channels < 1) {
        throw std::invalid_argument("ImageTensor: dimensions must be >= 1");
    }
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw std::invalid_argument("ImageTensor: data size mismatch");
    }
}

bool ImageTensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

NoiseField::NoiseField(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels),
      values_(static_cast<std::size_t>(height) * width * channels, 0.0) {
    if (height < 1 || width < 1 || channels < 1) {
        throw std::invalid_argument("NoiseField: dimensions must be >= 1");
    }
}

NoiseField::NoiseField(int height, int width, int channels,
                       std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
    if (height < 1 || width < 1 || channels < 1) {
        throw std::invalid_argument("NoiseField: dimensions must be >= 1");
    }
    if (values_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw std::invalid_argument("NoiseField: value buffer size mismatch");
    }
}

NoiseSeed sample_noise_seed(Rng& rng, int dim) {
    if (dim < 1) throw std::invalid_argument("sample_noise_seed: dim must be >= 1");
    NoiseSeed seed;
    seed.values.resize(dim);
    for (double& v : seed.values) v = rng.next_gaussian();
    return seed;
}

NoiseField sample_noise_field(Rng& rng, int height, int width, int channels,
                              NoiseMode mode) {
    if (height < 1 || width < 1 || channels < 1) {
        throw std::invalid_argument("sample_noise_field: dimensions must be >= 1");
    }
    NoiseField field(height, width, channels);
    if (mode == NoiseMode::PerPixel) {
        for (double& v : field.values()) v = rng.next_gaussian();
    } else {
        std::vector<double> per_channel(channels);
        for (double& v : per_channel) v = rng.next_gaussian();
        for (int i = 0; i < height; ++i) {
            for (int j = 0; j < width; ++j) {
                for (int c = 0; c < channels; ++c) {
                    field.at(i, j, c) = per_channel[c];
                }
            }
        }
    }
    return field;
}

} // namespace cimle
