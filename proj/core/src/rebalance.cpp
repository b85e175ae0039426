#include "cimle/rebalance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cimle/log.hpp"

namespace cimle {

double Kde::density(const std::array<double, 3>& c) const {
    const double h2 = bandwidth * bandwidth;
    const double norm =
        1.0 / std::pow(2.0 * std::numbers::pi * h2, 1.5);
    double sum = 0.0;
    for (const auto& centre : centres) {
        const double dx = c[0] - centre[0];
        const double dy = c[1] - centre[1];
        const double dz = c[2] - centre[2];
        sum += std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * h2));
    }
    return norm * sum / static_cast<double>(centres.size());
}

Kde fit_kde(const std::vector<std::array<double, 3>>& colors, double bandwidth) {
    if (colors.empty()) {
        throw std::invalid_argument("fit_kde: needs at least one colour");
    }
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw std::invalid_argument("fit_kde: bandwidth must be positive");
    }
    return Kde{colors, bandwidth};
}

double scott_bandwidth(const std::vector<std::array<double, 3>>& colors) {
    constexpr double kFloor = 1e-3;
    const std::size_t n = colors.size();
    if (n < 2) return kFloor;
    double mean_std = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        double mean = 0.0;
        for (const auto& c : colors) mean += c[axis];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& c : colors) {
            const double d = c[axis] - mean;
            ss += d * d;
        }
        mean_std += std::sqrt(ss / static_cast<double>(n - 1));
    }
    mean_std /= 3.0;
    const double h =
        std::pow(static_cast<double>(n), -1.0 / 7.0) * mean_std;
    return std::max(h, kFloor);
}

std::optional<std::array<double, 3>> average_color(const SemanticLayout& layout,
                                                   const ImageTensor& image,
                                                   int category) {
    if (layout.height() != image.height() || layout.width() != image.width()) {
        throw std::invalid_argument("average_color: shape mismatch");
    }
    if (image.channels() != 3) {
        throw std::invalid_argument("average_color: image must have 3 channels");
    }
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    long count = 0;
    for (int i = 0; i < layout.height(); ++i) {
        for (int j = 0; j < layout.width(); ++j) {
            if (layout.class_at(i, j) != category) continue;
            for (int c = 0; c < 3; ++c) sum[c] += image.at(i, j, c);
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    for (int c = 0; c < 3; ++c) sum[c] /= static_cast<double>(count);
    return sum;
}

RarityTable rarity_scores(const Dataset& dataset) {
    if (dataset.empty()) {
        throw std::invalid_argument("rarity_scores: dataset is empty");
    }
    const int num_classes = dataset.front().layout.num_classes();
    const int n = static_cast<int>(dataset.size());

    RarityTable table;
    table.num_classes = num_classes;
    table.num_images = n;
    table.colors.resize(num_classes);
    table.kde.resize(num_classes);
    table.rarity.assign(num_classes, std::vector<double>(n, 0.0));
    table.mask_score.assign(num_classes, std::vector<double>(n, 0.0));
    table.total_area.assign(num_classes, 0.0);

    for (int k = 0; k < n; ++k) {
        const auto& ex = dataset[k];
        if (ex.layout.num_classes() != num_classes) {
            throw std::invalid_argument("rarity_scores: inconsistent class counts");
        }
        for (int i = 0; i < ex.layout.height(); ++i) {
            for (int j = 0; j < ex.layout.width(); ++j) {
                table.total_area[ex.layout.class_at(i, j)] += 1.0;
            }
        }
        for (int p = 0; p < num_classes; ++p) {
            if (auto c = average_color(ex.layout, ex.image, p)) {
                table.colors[p].emplace_back(k, *c);
            }
        }
    }

    for (int p = 0; p < num_classes; ++p) {
        if (table.colors[p].empty()) continue;
        std::vector<std::array<double, 3>> centres;
        centres.reserve(table.colors[p].size());
        for (const auto& [k, c] : table.colors[p]) centres.push_back(c);
        table.kde[p] = fit_kde(centres, scott_bandwidth(centres));
        double max_r = 0.0;
        for (const auto& [k, c] : table.colors[p]) {
            const double r = 1.0 / table.kde[p]->density(c);
            table.rarity[p][k] = r;
            max_r = std::max(max_r, r);
        }
        if (max_r > 0.0) {
            for (int k = 0; k < n; ++k) {
                table.mask_score[p][k] = table.rarity[p][k] / max_r;
            }
        }
    }

    // Categories with the largest overall pixel area, at most five.
    std::vector<int> order;
    for (int p = 0; p < num_classes; ++p) {
        if (table.total_area[p] > 0.0) order.push_back(p);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return table.total_area[a] > table.total_area[b];
    });
    if (order.size() > 5) order.resize(5);
    table.top_categories = std::move(order);
    return table;
}

std::vector<int> sample_batch(const RarityTable& table, Rng& rng, int batch_size) {
    if (batch_size < 5) {
        throw std::invalid_argument("sample_batch: batch size must be >= 5");
    }
    if (table.top_categories.empty() || table.num_images == 0) {
        throw std::invalid_argument("sample_batch: empty table");
    }
    const int portions = static_cast<int>(table.top_categories.size());
    const int base = batch_size / portions;
    const int remainder = batch_size - base * portions;

    std::vector<int> batch;
    batch.reserve(batch_size);
    for (int t = 0; t < portions; ++t) {
        const int p = table.top_categories[t];
        const int quota = base + (t == 0 ? remainder : 0);
        const auto& scores = table.rarity[p];
        double total = 0.0;
        for (double s : scores) total += s;
        std::vector<double> cdf(scores.size());
        if (total > 0.0) {
            double acc = 0.0;
            for (std::size_t k = 0; k < scores.size(); ++k) {
                acc += scores[k] / total;
                cdf[k] = acc;
            }
        } else {
            log_info("sample_batch: category " + std::to_string(p) +
                     " has all-zero rarity, using uniform fallback");
            for (std::size_t k = 0; k < scores.size(); ++k) {
                cdf[k] = static_cast<double>(k + 1) / scores.size();
            }
        }
        cdf.back() = 1.0;
        for (int q = 0; q < quota; ++q) {
            const double u = rng.next_uniform();
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            batch.push_back(static_cast<int>(it - cdf.begin()));
        }
    }
    return batch;
}

PixelMask rarity_mask(const SemanticLayout& layout, int image_index,
                      const RarityTable& table) {
    if (image_index < 0 || image_index >= table.num_images) {
        throw std::invalid_argument("rarity_mask: image index out of range");
    }
    if (layout.num_classes() != table.num_classes) {
        throw std::invalid_argument("rarity_mask: class count mismatch");
    }
    PixelMask mask;
    mask.height = layout.height();
    mask.width = layout.width();
    mask.values.resize(static_cast<std::size_t>(mask.height) * mask.width);
    double max_v = 0.0;
    for (int i = 0; i < mask.height; ++i) {
        for (int j = 0; j < mask.width; ++j) {
            const double v =
                table.mask_score[layout.class_at(i, j)][image_index];
            mask.values[static_cast<std::size_t>(i) * mask.width + j] = v;
            max_v = std::max(max_v, v);
        }
    }
    if (max_v == 0.0) {
        log_info("rarity_mask: all scores zero for image " +
                 std::to_string(image_index) + ", using an all-ones mask");
        std::fill(mask.values.begin(), mask.values.end(), 1.0);
        return mask;
    }
    for (double& v : mask.values) v /= max_v;
    return mask;
}

} // namespace cimle
