#pragma once

#include <array>
#include <optional>
#include <vector>

#include "cimle/rng.hpp"
#include "cimle/tensor.hpp"

namespace cimle {

/// Isotropic 3-D Gaussian kernel density estimate over average colours.
struct Kde {
    std::vector<std::array<double, 3>> centres;
    double bandwidth = 0.0;

    double density(const std::array<double, 3>& c) const;
};

Kde fit_kde(const std::vector<std::array<double, 3>>& colors, double bandwidth);

/// Scott's rule for 3-dimensional data, h = N^(-1/7) * mean per-axis
/// standard deviation, floored at 1e-3 so duplicate colours cannot push
/// a density to infinity.
double scott_bandwidth(const std::vector<std::array<double, 3>>& colors);

/// Mean colour of class `category` in the image, or absent when the class
/// covers no pixel.
std::optional<std::array<double, 3>> average_color(const SemanticLayout& layout,
                                                   const ImageTensor& image,
                                                   int category);

/// All rebalancing quantities, computed once before training and immutable
/// afterwards.
struct RarityTable {
    int num_classes = 0;
    int num_images = 0;
    /// (image index, average colour) per category, images containing it only.
    std::vector<std::vector<std::pair<int, std::array<double, 3>>>> colors;
    std::vector<std::optional<Kde>> kde;           // per category
    std::vector<std::vector<double>> rarity;       // [category][image], 0 if absent
    /// rarity divided by the category's max, so mask values compare
    /// within-category rarity rather than raw inverse densities (whose
    /// scale is arbitrary per category).
    std::vector<std::vector<double>> mask_score;
    std::vector<double> total_area;                // pixels per category
    std::vector<int> top_categories;               // by descending area, <= 5
};

RarityTable rarity_scores(const Dataset& dataset);

/// Partition the batch into equal portions over the top-area categories
/// (remainder to the largest), then draw images within each portion with
/// probability proportional to their rarity scores. Duplicates allowed.
/// A portion whose scores are all zero falls back to uniform, logged.
std::vector<int> sample_batch(const RarityTable& table, Rng& rng, int batch_size);

/// Normalized rarity mask M-hat for image k: per-pixel within-category
/// rarity scores divided by the image max, so the max entry is exactly 1
/// and all entries lie in (0,1]. An all-zero mask degenerates to ones.
PixelMask rarity_mask(const SemanticLayout& layout, int image_index,
                      const RarityTable& table);

} // namespace cimle
