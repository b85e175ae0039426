#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cimle/tensor.hpp"

namespace cimle {

/// Per-layer weights of the multi-layer feature distance, all > 0.
struct LayerWeights {
    std::vector<double> lambda;

    void validate(int layers) const;
};

/// A frozen multi-scale feature pyramid: fixed random 3x3 filter banks
/// with a pointwise tanh and 2x average pooling between layers. The same
/// seed produces the same features everywhere, so the pyramid behaves as
/// a deterministic stand-in for a pretrained feature network.
class FeatureExtractor {
public:
    struct LayerShape {
        int height;
        int width;
        int channels;
    };

    FeatureExtractor(std::uint64_t seed, int height, int width,
                     std::vector<int> widths = {4, 6, 6, 6, 6},
                     int in_channels = 3);

    std::uint64_t seed() const { return seed_; }
    int layers() const { return static_cast<int>(widths_.size()); }
    int input_height() const { return height_; }
    int input_width() const { return width_; }
    const std::vector<LayerShape>& shapes() const { return shapes_; }

    /// Feature maps Phi_1..Phi_l, each dense row-major.
    std::vector<std::vector<double>> extract(const ImageTensor& y) const;

    /// Reverse-mode pullback: gradient with respect to the input image of
    /// sum_i <cotangents[i], Phi_i(y)>.
    ImageTensor backprop(const ImageTensor& y,
                         const std::vector<std::vector<double>>& cotangents) const;

private:
    std::uint64_t seed_;
    int height_;
    int width_;
    int in_channels_;
    std::vector<int> widths_;
    std::vector<LayerShape> shapes_;
    std::vector<std::vector<double>> filters_; // per layer, conv3x3 weights
};

/// sum_i lambda_i * || mask_i o (Phi_i(y) - Phi_i(yhat)) ||_1, where mask_i
/// is the optional pixel mask area-downsampled to layer i's grid.
double perceptual_distance(const FeatureExtractor& fe, const LayerWeights& lw,
                           const ImageTensor& y, const ImageTensor& yhat,
                           const PixelMask* mask = nullptr);

/// Gradient of perceptual_distance with respect to yhat. Ties in the L1
/// terms contribute subgradient zero.
ImageTensor perceptual_distance_grad(const FeatureExtractor& fe,
                                     const LayerWeights& lw, const ImageTensor& y,
                                     const ImageTensor& yhat,
                                     const PixelMask* mask = nullptr);

/// lambda_i = 1 / mean over pairs of ||Phi_i(y) - Phi_i(yhat)||_1, so each
/// layer's mean contribution to the total is the same on the calibration
/// set. A layer with zero mean difference makes the set degenerate.
LayerWeights calibrate_lambda(
    const FeatureExtractor& fe,
    const std::vector<std::pair<ImageTensor, ImageTensor>>& pairs);

/// Squared Euclidean distance; the optional mask weights per-pixel terms.
double l2_distance(const ImageTensor& a, const ImageTensor& b,
                   const PixelMask* mask = nullptr);

/// Gradient of l2_distance with respect to b.
ImageTensor l2_distance_grad(const ImageTensor& a, const ImageTensor& b,
                             const PixelMask* mask = nullptr);

/// Area-average the mask down to (height, width); both must divide the
/// source grid by the same power of two.
PixelMask downsample_mask(const PixelMask& mask, int height, int width);

/// The standard five-layer pyramid, truncated to as many levels as the
/// resolution can halve. A 16x32 input gets all five layers.
FeatureExtractor make_default_extractor(std::uint64_t seed, int height, int width);

/// Runtime-selectable distance used by the training loop and evaluation.
class Metric {
public:
    virtual ~Metric() = default;
    virtual double value(const ImageTensor& y, const ImageTensor& yhat,
                         const PixelMask* mask = nullptr) const = 0;
    /// Derivative of value with respect to yhat.
    virtual ImageTensor grad(const ImageTensor& y, const ImageTensor& yhat,
                             const PixelMask* mask = nullptr) const = 0;
};

class L2Metric final : public Metric {
public:
    double value(const ImageTensor& y, const ImageTensor& yhat,
                 const PixelMask* mask) const override;
    ImageTensor grad(const ImageTensor& y, const ImageTensor& yhat,
                     const PixelMask* mask) const override;
};

class PerceptualMetric final : public Metric {
public:
    PerceptualMetric(FeatureExtractor fe, LayerWeights lw);

    const FeatureExtractor& extractor() const { return fe_; }
    const LayerWeights& weights() const { return lw_; }

    double value(const ImageTensor& y, const ImageTensor& yhat,
                 const PixelMask* mask) const override;
    ImageTensor grad(const ImageTensor& y, const ImageTensor& yhat,
                     const PixelMask* mask) const override;

private:
    FeatureExtractor fe_;
    LayerWeights lw_;
};

} // namespace cimle
