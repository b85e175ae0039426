#pragma once

#include <array>
#include <string>
#include <vector>

#include "cimle/rng.hpp"
#include "cimle/tensor.hpp"

namespace cimle {

/// Conditional Gaussian-mixture task: each condition id maps to k
/// well-separated modes in a tiny image space, so mode coverage of a
/// trained model can be measured exactly.
struct GmmTaskSpec {
    int num_conditions = 4;
    int modes_per_condition = 3;
    int height = 1;
    int width = 2;
    double mode_std = 0.02;
    int samples_per_condition = 64;
    /// [condition][mode] -> flattened centre (height*width*3). Left empty,
    /// centres are generated with pairwise separation >= 12 * mode_std.
    std::vector<std::vector<std::vector<double>>> centres;

    int output_dim() const { return height * width * 3; }
    void validate() const; // centres pairwise >= 6 * mode_std, k >= 2
};

struct GmmSampleInfo {
    int condition = 0;
    int true_mode = 0;
};

struct GmmDataset {
    GmmTaskSpec spec; // resolved: centres filled in
    Dataset data;
    std::vector<GmmSampleInfo> meta;
};

/// The condition's constant label map (class id == condition id).
SemanticLayout gmm_condition_layout(const GmmTaskSpec& spec, int condition);

/// Every sample draws a uniform mode, then adds isotropic noise truncated
/// at 3.5 sigma per axis, which keeps each sample assignable to its true
/// mode given the separation invariant.
GmmDataset gen_gmm_dataset(GmmTaskSpec spec, Rng& rng);

/// Layout-to-image task: procedural band layouts painted with per-class
/// palette modes chosen once per image, so appearance modes are globally
/// consistent within an image.
struct LayoutTaskSpec {
    int height = 16;
    int width = 32;
    int num_classes = 5;    // <= 8
    int palette_modes = 2;  // colour modes per class, >= 2
    int num_layouts = 8;
    int images_per_layout = 64;
    double noise_std = 0.02;
    /// 0 keeps the mode choice uniform; otherwise mode 0 of every class is
    /// drawn with this probability (the dataset-skew knob).
    double mode_bias = 0.0;
    /// [class][mode] -> RGB. Left empty, palettes are generated with
    /// pairwise max-norm separation >= 0.3.
    std::vector<std::vector<std::array<double, 3>>> palette;

    void validate() const;
};

struct LayoutDataset {
    LayoutTaskSpec spec; // resolved: palette filled in
    Dataset data;
    std::vector<SemanticLayout> distinct_layouts;
    std::vector<int> layout_of_image;
    /// [image][class] -> chosen palette mode, -1 when the class is absent.
    std::vector<std::vector<int>> mode_of_class;
};

LayoutDataset gen_layout_dataset(LayoutTaskSpec spec, Rng& rng);

/// Index of the palette mode closest (L2) to the given colour.
int nearest_palette_mode(const LayoutTaskSpec& spec, int cls,
                         const std::array<double, 3>& color);

/// Sidecar CSVs: (image_index, class, mode_id) for the layout task and
/// (image_index, condition, mode_id) for the GMM task.
void write_layout_metadata_csv(const std::string& path, const LayoutDataset& ds);
void write_gmm_metadata_csv(const std::string& path, const GmmDataset& ds);

} // namespace cimle
