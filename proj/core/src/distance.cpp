#include "cimle/distance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cimle/generator.hpp"
#include "cimle/rng.hpp"
#include "nn_kernels.hpp"

namespace cimle {

void LayerWeights::validate(int layers) const {
    if (static_cast<int>(lambda.size()) != layers) {
        throw std::invalid_argument("LayerWeights: size does not match layer count");
    }
    for (double v : lambda) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("LayerWeights: entries must be positive and finite");
        }
    }
}

FeatureExtractor::FeatureExtractor(std::uint64_t seed, int height, int width,
                                   std::vector<int> widths, int in_channels)
    : seed_(seed), height_(height), width_(width), in_channels_(in_channels),
      widths_(std::move(widths)) {
    if (height < 1 || width < 1 || in_channels < 1) {
        throw std::invalid_argument("FeatureExtractor: dimensions must be >= 1");
    }
    if (widths_.empty()) {
        throw std::invalid_argument("FeatureExtractor: needs at least one layer");
    }
    const int l = static_cast<int>(widths_.size());
    if (height % (1 << (l - 1)) != 0 || width % (1 << (l - 1)) != 0) {
        throw std::invalid_argument(
            "FeatureExtractor: resolution must be divisible by 2^(layers-1)");
    }
    Rng rng(seed);
    int cin = in_channels_;
    for (int i = 0; i < l; ++i) {
        const int w = widths_[i];
        if (w < 1) throw std::invalid_argument("FeatureExtractor: width must be >= 1");
        shapes_.push_back({height >> i, width >> i, w});
        std::vector<double> bank(9ull * cin * w);
        const double scale = 1.0 / std::sqrt(9.0 * cin);
        for (double& v : bank) v = scale * rng.next_gaussian();
        filters_.push_back(std::move(bank));
        cin = w;
    }
}

std::vector<std::vector<double>> FeatureExtractor::extract(const ImageTensor& y) const {
    if (y.height() != height_ || y.width() != width_ ||
        y.channels() != in_channels_) {
        throw std::invalid_argument("extract: image shape mismatch");
    }
    if (!y.all_finite()) throw NumericError("extract: non-finite input");
    const int l = layers();
    std::vector<double> zero_bias(*std::max_element(widths_.begin(), widths_.end()),
                                  0.0);
    std::vector<std::vector<double>> features(l);
    const std::vector<double>* input = &y.data();
    std::vector<double> pooled;
    int cin = in_channels_;
    for (int i = 0; i < l; ++i) {
        const auto& sh = shapes_[i];
        if (i > 0) {
            pooled.assign(static_cast<std::size_t>(sh.height) * sh.width * cin, 0.0);
            nn::avgpool2(input->data(), sh.height * 2, sh.width * 2, cin,
                         pooled.data());
            input = &pooled;
        }
        std::vector<double> pre(
            static_cast<std::size_t>(sh.height) * sh.width * sh.channels, 0.0);
        nn::conv3x3(input->data(), sh.height, sh.width, cin, filters_[i].data(),
                    zero_bias.data(), sh.channels, pre.data());
        features[i].resize(pre.size());
        nn::tanh_map(pre.data(), pre.size(), features[i].data());
        input = &features[i];
        cin = sh.channels;
    }
    return features;
}

ImageTensor FeatureExtractor::backprop(
    const ImageTensor& y, const std::vector<std::vector<double>>& cotangents) const {
    const int l = layers();
    if (static_cast<int>(cotangents.size()) != l) {
        throw std::invalid_argument("backprop: cotangent count mismatch");
    }
    const auto features = extract(y);
    // Pooled inputs are cheap to recompute layer by layer on the way down,
    // but we need them for conv input gradients only, and conv3x3's input
    // gradient depends on the filters alone. Walk from the deepest layer up.
    std::vector<double> g_phi = cotangents[l - 1];
    for (int i = l - 1; i >= 0; --i) {
        const auto& sh = shapes_[i];
        const int cin = i == 0 ? in_channels_ : widths_[i - 1];
        std::vector<double> g_pre(features[i].size());
        nn::tanh_grad_from_output(features[i].data(), g_phi.data(), g_pre.size(),
                                  g_pre.data());
        std::vector<double> g_in(
            static_cast<std::size_t>(sh.height) * sh.width * cin, 0.0);
        nn::conv3x3_grad_input(g_pre.data(), sh.height, sh.width, sh.channels,
                               filters_[i].data(), cin, g_in.data());
        if (i == 0) {
            return ImageTensor(height_, width_, in_channels_, std::move(g_in));
        }
        std::vector<double> g_prev(features[i - 1].size(), 0.0);
        nn::avgpool2_grad(g_in.data(), sh.height, sh.width, cin, g_prev.data());
        for (std::size_t t = 0; t < g_prev.size(); ++t) {
            g_prev[t] += cotangents[i - 1][t];
        }
        g_phi = std::move(g_prev);
    }
    throw std::logic_error("backprop: unreachable");
}

FeatureExtractor make_default_extractor(std::uint64_t seed, int height, int width) {
    static const std::vector<int> kWidths = {4, 6, 6, 6, 6};
    int layers = 1;
    while (layers < static_cast<int>(kWidths.size()) &&
           height % (1 << layers) == 0 && width % (1 << layers) == 0) {
        ++layers;
    }
    return FeatureExtractor(
        seed, height, width,
        std::vector<int>(kWidths.begin(), kWidths.begin() + layers));
}

PixelMask downsample_mask(const PixelMask& mask, int height, int width) {
    if (mask.height == height && mask.width == width) return mask;
    if (mask.height % 2 != 0 || mask.width % 2 != 0) {
        throw std::invalid_argument("downsample_mask: odd source grid");
    }
    PixelMask half;
    half.height = mask.height / 2;
    half.width = mask.width / 2;
    half.values.assign(static_cast<std::size_t>(half.height) * half.width, 0.0);
    nn::avgpool2(mask.values.data(), mask.height, mask.width, 1, half.values.data());
    return downsample_mask(half, height, width);
}

namespace {

void check_pair(const FeatureExtractor& fe, const ImageTensor& y,
                const ImageTensor& yhat) {
    if (y.height() != yhat.height() || y.width() != yhat.width() ||
        y.channels() != yhat.channels()) {
        throw std::invalid_argument("distance: image shape mismatch");
    }
    if (!y.all_finite() || !yhat.all_finite()) {
        throw NumericError("distance: non-finite input");
    }
    (void)fe;
}

std::vector<PixelMask> layer_masks(const FeatureExtractor& fe,
                                   const PixelMask& mask) {
    if (mask.height != fe.input_height() || mask.width != fe.input_width()) {
        throw std::invalid_argument("distance: mask shape mismatch");
    }
    std::vector<PixelMask> per_layer;
    per_layer.reserve(fe.layers());
    for (const auto& sh : fe.shapes()) {
        per_layer.push_back(downsample_mask(mask, sh.height, sh.width));
    }
    return per_layer;
}

} // namespace

double perceptual_distance(const FeatureExtractor& fe, const LayerWeights& lw,
                           const ImageTensor& y, const ImageTensor& yhat,
                           const PixelMask* mask) {
    check_pair(fe, y, yhat);
    lw.validate(fe.layers());
    const auto fy = fe.extract(y);
    const auto fh = fe.extract(yhat);
    std::vector<PixelMask> masks;
    if (mask != nullptr) masks = layer_masks(fe, *mask);
    double total = 0.0;
    for (int i = 0; i < fe.layers(); ++i) {
        const auto& sh = fe.shapes()[i];
        double layer_sum = 0.0;
        for (std::size_t t = 0; t < fy[i].size(); ++t) {
            double term = std::fabs(fy[i][t] - fh[i][t]);
            if (mask != nullptr) {
                term *= masks[i].values[t / sh.channels];
            }
            layer_sum += term;
        }
        total += lw.lambda[i] * layer_sum;
    }
    return total;
}

ImageTensor perceptual_distance_grad(const FeatureExtractor& fe,
                                     const LayerWeights& lw, const ImageTensor& y,
                                     const ImageTensor& yhat,
                                     const PixelMask* mask) {
    check_pair(fe, y, yhat);
    lw.validate(fe.layers());
    const auto fy = fe.extract(y);
    const auto fh = fe.extract(yhat);
    std::vector<PixelMask> masks;
    if (mask != nullptr) masks = layer_masks(fe, *mask);
    std::vector<std::vector<double>> cotangents(fe.layers());
    for (int i = 0; i < fe.layers(); ++i) {
        const auto& sh = fe.shapes()[i];
        cotangents[i].resize(fh[i].size());
        for (std::size_t t = 0; t < fh[i].size(); ++t) {
            const double diff = fy[i][t] - fh[i][t];
            // d|a-b|/db = -sign(a-b); subgradient 0 at ties.
            double g = diff > 0.0 ? -1.0 : (diff < 0.0 ? 1.0 : 0.0);
            g *= lw.lambda[i];
            if (mask != nullptr) g *= masks[i].values[t / sh.channels];
            cotangents[i][t] = g;
        }
    }
    return fe.backprop(yhat, cotangents);
}

LayerWeights calibrate_lambda(
    const FeatureExtractor& fe,
    const std::vector<std::pair<ImageTensor, ImageTensor>>& pairs) {
    if (pairs.empty()) {
        throw std::invalid_argument("calibrate_lambda: needs at least one pair");
    }
    std::vector<double> mean_l1(fe.layers(), 0.0);
    for (const auto& [y, yhat] : pairs) {
        check_pair(fe, y, yhat);
        const auto fy = fe.extract(y);
        const auto fh = fe.extract(yhat);
        for (int i = 0; i < fe.layers(); ++i) {
            double s = 0.0;
            for (std::size_t t = 0; t < fy[i].size(); ++t) {
                s += std::fabs(fy[i][t] - fh[i][t]);
            }
            mean_l1[i] += s;
        }
    }
    LayerWeights lw;
    lw.lambda.resize(fe.layers());
    for (int i = 0; i < fe.layers(); ++i) {
        mean_l1[i] /= static_cast<double>(pairs.size());
        if (mean_l1[i] <= 0.0) {
            throw std::invalid_argument(
                "calibrate_lambda: layer " + std::to_string(i) +
                " has zero mean difference (degenerate calibration set)");
        }
        lw.lambda[i] = 1.0 / mean_l1[i];
    }
    return lw;
}

double l2_distance(const ImageTensor& a, const ImageTensor& b,
                   const PixelMask* mask) {
    if (a.height() != b.height() || a.width() != b.width() ||
        a.channels() != b.channels()) {
        throw std::invalid_argument("l2_distance: shape mismatch");
    }
    double total = 0.0;
    const int ch = a.channels();
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a.data()[t] - b.data()[t];
        double term = d * d;
        if (mask != nullptr) term *= mask->values[t / ch];
        total += term;
    }
    return total;
}

ImageTensor l2_distance_grad(const ImageTensor& a, const ImageTensor& b,
                             const PixelMask* mask) {
    if (a.height() != b.height() || a.width() != b.width() ||
        a.channels() != b.channels()) {
        throw std::invalid_argument("l2_distance_grad: shape mismatch");
    }
    ImageTensor g(a.height(), a.width(), a.channels());
    const int ch = a.channels();
    for (std::size_t t = 0; t < a.size(); ++t) {
        double v = 2.0 * (b.data()[t] - a.data()[t]);
        if (mask != nullptr) v *= mask->values[t / ch];
        g.data()[t] = v;
    }
    return g;
}

double L2Metric::value(const ImageTensor& y, const ImageTensor& yhat,
                       const PixelMask* mask) const {
    return l2_distance(y, yhat, mask);
}

ImageTensor L2Metric::grad(const ImageTensor& y, const ImageTensor& yhat,
                           const PixelMask* mask) const {
    return l2_distance_grad(y, yhat, mask);
}

PerceptualMetric::PerceptualMetric(FeatureExtractor fe, LayerWeights lw)
    : fe_(std::move(fe)), lw_(std::move(lw)) {
    lw_.validate(fe_.layers());
}

double PerceptualMetric::value(const ImageTensor& y, const ImageTensor& yhat,
                               const PixelMask* mask) const {
    return perceptual_distance(fe_, lw_, y, yhat, mask);
}

ImageTensor PerceptualMetric::grad(const ImageTensor& y, const ImageTensor& yhat,
                                   const PixelMask* mask) const {
    return perceptual_distance_grad(fe_, lw_, y, yhat, mask);
}

} // namespace cimle
