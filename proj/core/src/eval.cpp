#include "cimle/eval.hpp"

#include <cmath>
#include <stdexcept>

namespace cimle {

namespace {

constexpr std::uint64_t kTagDiversity = 21;

} // namespace

Rng diversity_draw_rng(const Rng& base, const SemanticLayout& input) {
    return base.fork(kTagDiversity, input.content_hash());
}

DiversityReport diversity_score(const GeneratorState& state,
                                std::span<const SemanticLayout> inputs,
                                int pairs_per_input, const Metric& metric,
                                std::uint64_t metric_seed, const Rng& rng) {
    if (pairs_per_input < 1) {
        throw std::invalid_argument("diversity_score: pairs_per_input must be >= 1");
    }
    DiversityReport report;
    report.num_inputs = static_cast<int>(inputs.size());
    report.pairs_per_input = pairs_per_input;
    report.metric_seed = metric_seed;
    if (inputs.empty()) return report;

    for (const SemanticLayout& x : inputs) {
        Rng draw = diversity_draw_rng(rng, x);
        double sum = 0.0;
        for (int t = 0; t < pairs_per_input; ++t) {
            const NoiseSeed za = sample_noise_seed(draw, state.spec.seed_dim);
            const NoiseSeed zb = sample_noise_seed(draw, state.spec.seed_dim);
            const ImageTensor a = generate(state, x, za);
            const ImageTensor b = generate(state, x, zb);
            sum += metric.value(a, b, nullptr);
        }
        report.per_input_mean.push_back(sum / pairs_per_input);
    }
    double total = 0.0;
    for (double v : report.per_input_mean) total += v;
    report.global_mean = total / static_cast<double>(report.per_input_mean.size());
    return report;
}

double coverage_of_samples(std::span<const std::vector<double>> samples,
                           const std::vector<std::vector<double>>& true_modes,
                           double eps) {
    if (true_modes.empty()) {
        throw std::invalid_argument("coverage_of_samples: no modes given");
    }
    std::vector<bool> hit(true_modes.size(), false);
    for (const std::vector<double>& s : samples) {
        for (std::size_t m = 0; m < true_modes.size(); ++m) {
            if (hit[m]) continue;
            if (true_modes[m].size() != s.size()) {
                throw std::invalid_argument("coverage_of_samples: dim mismatch");
            }
            double ss = 0.0;
            for (std::size_t t = 0; t < s.size(); ++t) {
                const double d = s[t] - true_modes[m][t];
                ss += d * d;
            }
            if (std::sqrt(ss) <= eps) hit[m] = true;
        }
    }
    int count = 0;
    for (bool h : hit) count += h ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(true_modes.size());
}

double mode_coverage(const GeneratorState& state, const SemanticLayout& condition,
                     const std::vector<std::vector<double>>& true_modes, double eps,
                     int num_samples, Rng& rng) {
    if (true_modes.empty()) {
        throw std::invalid_argument("mode_coverage: no modes given");
    }
    if (num_samples < 1) {
        throw std::invalid_argument("mode_coverage: num_samples must be >= 1");
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < true_modes.size(); ++a) {
        if (true_modes[a].size() != true_modes.front().size()) {
            throw std::invalid_argument("mode_coverage: inconsistent mode dims");
        }
        for (std::size_t b = a + 1; b < true_modes.size(); ++b) {
            double s = 0.0;
            for (std::size_t t = 0; t < true_modes[a].size(); ++t) {
                const double d = true_modes[a][t] - true_modes[b][t];
                s += d * d;
            }
            min_dist = std::min(min_dist, std::sqrt(s));
        }
    }
    if (true_modes.size() > 1 && !(eps < 0.5 * min_dist)) {
        throw std::invalid_argument(
            "mode_coverage: eps-balls overlap (eps >= half min inter-mode distance)");
    }
    if (!(eps > 0.0)) {
        throw std::invalid_argument("mode_coverage: eps must be positive");
    }

    std::vector<std::vector<double>> samples;
    samples.reserve(num_samples);
    for (int s = 0; s < num_samples; ++s) {
        const NoiseSeed z = sample_noise_seed(rng, state.spec.seed_dim);
        samples.push_back(generate(state, condition, z).data());
    }
    return coverage_of_samples(samples, true_modes, eps);
}

std::vector<ImageTensor> interpolate(const GeneratorState& state,
                                     const SemanticLayout& x, const NoiseSeed& a,
                                     const NoiseSeed& b, int steps) {
    if (steps < 2) throw std::invalid_argument("interpolate: steps must be >= 2");
    if (a.dim() != b.dim() || a.dim() != state.spec.seed_dim) {
        throw std::invalid_argument("interpolate: seed dimension mismatch");
    }
    std::vector<ImageTensor> frames;
    frames.reserve(steps);
    for (int t = 0; t < steps; ++t) {
        if (t == 0) {
            frames.push_back(generate(state, x, a));
        } else if (t == steps - 1) {
            frames.push_back(generate(state, x, b));
        } else {
            const double alpha = static_cast<double>(t) / (steps - 1);
            NoiseSeed z;
            z.values.resize(a.dim());
            for (int d = 0; d < a.dim(); ++d) {
                z.values[d] = (1.0 - alpha) * a.values[d] + alpha * b.values[d];
            }
            frames.push_back(generate(state, x, z));
        }
    }
    return frames;
}

std::vector<ImageTensor> style_consistency(const GeneratorState& state,
                                           std::span<const SemanticLayout> layouts,
                                           const NoiseSeed& seed) {
    std::vector<ImageTensor> images;
    images.reserve(layouts.size());
    for (const SemanticLayout& x : layouts) {
        images.push_back(generate(state, x, seed));
    }
    return images;
}

ImageTensor make_mosaic(std::span<const ImageTensor> images) {
    if (images.empty()) throw std::invalid_argument("make_mosaic: no images");
    const int h = images[0].height();
    const int w = images[0].width();
    const int ch = images[0].channels();
    for (const ImageTensor& img : images) {
        if (img.height() != h || img.width() != w || img.channels() != ch) {
            throw std::invalid_argument("make_mosaic: mixed image shapes");
        }
    }
    const int n = static_cast<int>(images.size());
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;
    ImageTensor grid(rows * h, cols * w, ch);
    for (int t = 0; t < n; ++t) {
        const int r = t / cols;
        const int c = t % cols;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                for (int q = 0; q < ch; ++q) {
                    grid.at(r * h + i, c * w + j, q) = images[t].at(i, j, q);
                }
            }
        }
    }
    return grid;
}

} // namespace cimle
