#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cimle/distance.hpp"
#include "cimle/generator.hpp"
#include "cimle/rng.hpp"
#include "cimle/tensor.hpp"

namespace cimle {

/// Mean pairwise distance between samples generated for the same input,
/// averaged over inputs. The metric should be held out from training
/// (built from a different extractor seed), so absolute values are not
/// comparable to published learned-metric numbers, only orderings are.
struct DiversityReport {
    std::vector<double> per_input_mean;
    double global_mean = 0.0;
    int num_inputs = 0;
    int pairs_per_input = 0;
    std::uint64_t metric_seed = 0;
};

/// The latent-draw stream for one input of the diversity protocol.
/// Exposed so reports can be recomputed independently of diversity_score.
Rng diversity_draw_rng(const Rng& base, const SemanticLayout& input);

/// For each input, draw 2 * pairs_per_input independent latent seeds, form
/// disjoint pairs, and average the metric over them. Draws are keyed to
/// the layout content, not its list position, so permuting the inputs
/// permutes the per-input means and leaves the global mean unchanged.
DiversityReport diversity_score(const GeneratorState& state,
                                std::span<const SemanticLayout> inputs,
                                int pairs_per_input, const Metric& metric,
                                std::uint64_t metric_seed, const Rng& rng);

/// Counting core shared by mode_coverage and its test oracles: the
/// fraction of modes with at least one sample within Euclidean radius eps.
double coverage_of_samples(std::span<const std::vector<double>> samples,
                           const std::vector<std::vector<double>>& true_modes,
                           double eps);

/// Fraction of true modes hit by at least one of num_samples generated
/// outputs within Euclidean radius eps. eps must stay below half the
/// minimum inter-mode distance so the balls cannot overlap.
double mode_coverage(const GeneratorState& state, const SemanticLayout& condition,
                     const std::vector<std::vector<double>>& true_modes, double eps,
                     int num_samples, Rng& rng);

/// Images along the straight line between two latent seeds, alpha evenly
/// spaced on [0,1]. The endpoint frames are bit-identical to generating
/// at the seeds directly.
std::vector<ImageTensor> interpolate(const GeneratorState& state,
                                     const SemanticLayout& x, const NoiseSeed& a,
                                     const NoiseSeed& b, int steps);

/// One image per layout, all generated from the identical seed: the
/// fixed-noise protocol behind style-consistency grids.
std::vector<ImageTensor> style_consistency(const GeneratorState& state,
                                           std::span<const SemanticLayout> layouts,
                                           const NoiseSeed& seed);

/// Row-major tile grid (ceil(sqrt(n)) columns); empty cells stay black.
ImageTensor make_mosaic(std::span<const ImageTensor> images);

} // namespace cimle
