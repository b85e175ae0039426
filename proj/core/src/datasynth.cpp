#include "cimle/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cimle {

namespace {

constexpr std::uint64_t kTagCentres = 11;
constexpr std::uint64_t kTagPalette = 12;
constexpr std::uint64_t kTagLayouts = 13;
constexpr std::uint64_t kTagImages = 14;

double truncated_gaussian(Rng& rng, double limit) {
    for (;;) {
        const double v = rng.next_gaussian();
        if (std::fabs(v) <= limit) return v;
    }
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a[t] - b[t];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace

void GmmTaskSpec::validate() const {
    if (num_conditions < 1 || height < 1 || width < 1 ||
        samples_per_condition < 1) {
        throw std::invalid_argument("GmmTaskSpec: counts must be >= 1");
    }
    if (modes_per_condition < 2) {
        throw std::invalid_argument("GmmTaskSpec: needs at least 2 modes");
    }
    // std 0 is the degenerate point-mass case; useful in tests.
    if (!(mode_std >= 0.0)) {
        throw std::invalid_argument("GmmTaskSpec: mode std must be >= 0");
    }
    if (centres.empty()) return;
    if (static_cast<int>(centres.size()) != num_conditions) {
        throw std::invalid_argument("GmmTaskSpec: centre table size mismatch");
    }
    for (const auto& modes : centres) {
        if (static_cast<int>(modes.size()) != modes_per_condition) {
            throw std::invalid_argument("GmmTaskSpec: centre table size mismatch");
        }
        for (const auto& c : modes) {
            if (static_cast<int>(c.size()) != output_dim()) {
                throw std::invalid_argument("GmmTaskSpec: centre dimension mismatch");
            }
            for (double v : c) {
                if (v < 0.0 || v > 1.0) {
                    throw std::invalid_argument("GmmTaskSpec: centres must lie in [0,1]");
                }
            }
        }
        for (std::size_t a = 0; a < modes.size(); ++a) {
            for (std::size_t b = a + 1; b < modes.size(); ++b) {
                if (euclidean(modes[a], modes[b]) < 6.0 * mode_std) {
                    throw std::invalid_argument(
                        "GmmTaskSpec: mode centres closer than 6 * std");
                }
            }
        }
    }
}

SemanticLayout gmm_condition_layout(const GmmTaskSpec& spec, int condition) {
    if (condition < 0 || condition >= spec.num_conditions) {
        throw std::invalid_argument("gmm_condition_layout: condition out of range");
    }
    std::vector<std::uint8_t> labels(
        static_cast<std::size_t>(spec.height) * spec.width,
        static_cast<std::uint8_t>(condition));
    return SemanticLayout(spec.height, spec.width, spec.num_conditions,
                          std::move(labels));
}

GmmDataset gen_gmm_dataset(GmmTaskSpec spec, Rng& rng) {
    spec.validate();
    if (spec.centres.empty()) {
        // Rejection-sample centres well inside [0,1] with a 12-sigma gap,
        // twice the invariant floor, so noisy samples stay unambiguous.
        Rng crng = rng.fork(kTagCentres);
        const double min_gap = std::max(12.0 * spec.mode_std, 0.05);
        spec.centres.resize(spec.num_conditions);
        for (auto& modes : spec.centres) {
            int attempts = 0;
            while (static_cast<int>(modes.size()) < spec.modes_per_condition) {
                if (++attempts > 100000) {
                    throw std::runtime_error(
                        "gen_gmm_dataset: cannot place separated centres; "
                        "reduce mode_std or modes_per_condition");
                }
                std::vector<double> c(spec.output_dim());
                for (double& v : c) v = 0.15 + 0.7 * crng.next_uniform();
                bool ok = true;
                for (const auto& other : modes) {
                    if (euclidean(c, other) < min_gap) {
                        ok = false;
                        break;
                    }
                }
                if (ok) modes.push_back(std::move(c));
            }
        }
        spec.validate();
    }

    GmmDataset ds;
    ds.spec = spec;
    for (int cond = 0; cond < spec.num_conditions; ++cond) {
        const SemanticLayout layout = gmm_condition_layout(spec, cond);
        Rng srng = rng.fork(kTagImages, static_cast<std::uint64_t>(cond));
        for (int s = 0; s < spec.samples_per_condition; ++s) {
            const int mode = static_cast<int>(srng.next_uniform() *
                                              spec.modes_per_condition) %
                             spec.modes_per_condition;
            std::vector<double> values = spec.centres[cond][mode];
            for (double& v : values) {
                v += spec.mode_std * truncated_gaussian(srng, 3.5);
                v = std::clamp(v, 0.0, 1.0);
            }
            ds.data.push_back(Example{
                layout, ImageTensor(spec.height, spec.width, 3, std::move(values))});
            ds.meta.push_back(GmmSampleInfo{cond, mode});
        }
    }
    return ds;
}

void LayoutTaskSpec::validate() const {
    if (height < 1 || width < 1 || num_layouts < 1 || images_per_layout < 1) {
        throw std::invalid_argument("LayoutTaskSpec: counts must be >= 1");
    }
    if (height < 2 && width < 2) {
        throw std::invalid_argument(
            "LayoutTaskSpec: layouts need at least two rows or columns");
    }
    if (num_classes < 2 || num_classes > 8) {
        throw std::invalid_argument("LayoutTaskSpec: num_classes must be in [2, 8]");
    }
    // A single palette mode is the degenerate unimodal case; useful in tests.
    if (palette_modes < 1) {
        throw std::invalid_argument("LayoutTaskSpec: needs >= 1 palette mode");
    }
    if (!(noise_std >= 0.0) || !(mode_bias >= 0.0 && mode_bias < 1.0)) {
        throw std::invalid_argument("LayoutTaskSpec: bad noise_std or mode_bias");
    }
    if (palette.empty()) return;
    if (static_cast<int>(palette.size()) != num_classes) {
        throw std::invalid_argument("LayoutTaskSpec: palette size mismatch");
    }
    for (const auto& modes : palette) {
        if (static_cast<int>(modes.size()) != palette_modes) {
            throw std::invalid_argument("LayoutTaskSpec: palette size mismatch");
        }
        for (std::size_t a = 0; a < modes.size(); ++a) {
            for (std::size_t b = a + 1; b < modes.size(); ++b) {
                double max_norm = 0.0;
                for (int c = 0; c < 3; ++c) {
                    max_norm = std::max(max_norm,
                                        std::fabs(modes[a][c] - modes[b][c]));
                }
                if (max_norm < 0.3) {
                    throw std::invalid_argument(
                        "LayoutTaskSpec: palette modes closer than 0.3 (max-norm)");
                }
            }
        }
    }
}

LayoutDataset gen_layout_dataset(LayoutTaskSpec spec, Rng& rng) {
    spec.validate();
    if (spec.palette.empty()) {
        Rng prng = rng.fork(kTagPalette);
        spec.palette.resize(spec.num_classes);
        for (auto& modes : spec.palette) {
            int attempts = 0;
            while (static_cast<int>(modes.size()) < spec.palette_modes) {
                if (++attempts > 100000) {
                    throw std::runtime_error(
                        "gen_layout_dataset: cannot place separated palette modes");
                }
                std::array<double, 3> c;
                for (double& v : c) v = 0.05 + 0.9 * prng.next_uniform();
                bool ok = true;
                for (const auto& other : modes) {
                    double max_norm = 0.0;
                    for (int t = 0; t < 3; ++t) {
                        max_norm = std::max(max_norm, std::fabs(c[t] - other[t]));
                    }
                    if (max_norm < 0.3) {
                        ok = false;
                        break;
                    }
                }
                if (ok) modes.push_back(c);
            }
        }
        spec.validate();
    }

    LayoutDataset ds;
    ds.spec = spec;

    // Stacked horizontal or vertical bands of distinct classes. Banding
    // needs at least two rows or columns along the chosen axis.
    for (int l = 0; l < spec.num_layouts; ++l) {
        Rng lrng = rng.fork(kTagLayouts, static_cast<std::uint64_t>(l));
        bool horizontal = lrng.next_uniform() < 0.5;
        if (horizontal && spec.height < 2) horizontal = false;
        if (!horizontal && spec.width < 2) horizontal = true;
        const int extent = horizontal ? spec.height : spec.width;
        const int max_bands = std::min({spec.num_classes, 4, extent});
        const int bands =
            2 + static_cast<int>(lrng.next_uniform() * (max_bands - 1)) %
                    (max_bands - 1);

        std::vector<int> classes(spec.num_classes);
        for (int p = 0; p < spec.num_classes; ++p) classes[p] = p;
        for (int p = spec.num_classes - 1; p > 0; --p) {
            const int q = static_cast<int>(lrng.next_uniform() * (p + 1)) % (p + 1);
            std::swap(classes[p], classes[q]);
        }
        classes.resize(bands);

        std::vector<int> cuts;
        while (static_cast<int>(cuts.size()) < bands - 1) {
            const int c = 1 + static_cast<int>(lrng.next_uniform() * (extent - 1)) %
                                  (extent - 1);
            if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) {
                cuts.push_back(c);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.push_back(extent);

        std::vector<std::uint8_t> labels(
            static_cast<std::size_t>(spec.height) * spec.width);
        for (int i = 0; i < spec.height; ++i) {
            for (int j = 0; j < spec.width; ++j) {
                const int pos = horizontal ? i : j;
                int band = 0;
                while (pos >= cuts[band]) ++band;
                labels[static_cast<std::size_t>(i) * spec.width + j] =
                    static_cast<std::uint8_t>(classes[band]);
            }
        }
        ds.distinct_layouts.emplace_back(spec.height, spec.width, spec.num_classes,
                                         std::move(labels));
    }

    for (int l = 0; l < spec.num_layouts; ++l) {
        const SemanticLayout& layout = ds.distinct_layouts[l];
        for (int r = 0; r < spec.images_per_layout; ++r) {
            Rng irng = rng.fork(kTagImages, static_cast<std::uint64_t>(l),
                                static_cast<std::uint64_t>(r));
            // One palette mode per class per image.
            std::vector<int> mode(spec.num_classes, -1);
            for (int p = 0; p < spec.num_classes; ++p) {
                double u = irng.next_uniform();
                int m;
                if (spec.palette_modes == 1) {
                    m = 0;
                } else if (spec.mode_bias > 0.0) {
                    if (u < spec.mode_bias) {
                        m = 0;
                    } else {
                        u = (u - spec.mode_bias) / (1.0 - spec.mode_bias);
                        m = 1 + static_cast<int>(u * (spec.palette_modes - 1)) %
                                    (spec.palette_modes - 1);
                    }
                } else {
                    m = static_cast<int>(u * spec.palette_modes) % spec.palette_modes;
                }
                mode[p] = m;
            }

            ImageTensor img(spec.height, spec.width, 3);
            for (int i = 0; i < spec.height; ++i) {
                for (int j = 0; j < spec.width; ++j) {
                    const int p = layout.class_at(i, j);
                    for (int c = 0; c < 3; ++c) {
                        double v = spec.palette[p][mode[p]][c];
                        if (spec.noise_std > 0.0) {
                            v += spec.noise_std * truncated_gaussian(irng, 4.0);
                        }
                        img.at(i, j, c) = std::clamp(v, 0.0, 1.0);
                    }
                }
            }

            // Classes absent from this layout carry no mode choice.
            std::vector<bool> present(spec.num_classes, false);
            for (int i = 0; i < spec.height; ++i) {
                for (int j = 0; j < spec.width; ++j) present[layout.class_at(i, j)] = true;
            }
            for (int p = 0; p < spec.num_classes; ++p) {
                if (!present[p]) mode[p] = -1;
            }

            ds.data.push_back(Example{layout, std::move(img)});
            ds.layout_of_image.push_back(l);
            ds.mode_of_class.push_back(std::move(mode));
        }
    }
    return ds;
}

int nearest_palette_mode(const LayoutTaskSpec& spec, int cls,
                         const std::array<double, 3>& color) {
    if (cls < 0 || cls >= static_cast<int>(spec.palette.size())) {
        throw std::invalid_argument("nearest_palette_mode: class out of range");
    }
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int m = 0; m < static_cast<int>(spec.palette[cls].size()); ++m) {
        double d = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double t = color[c] - spec.palette[cls][m][c];
            d += t * t;
        }
        if (d < best_d) {
            best_d = d;
            best = m;
        }
    }
    return best;
}

void write_layout_metadata_csv(const std::string& path, const LayoutDataset& ds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "image_index,class,mode_id\n";
    for (std::size_t k = 0; k < ds.mode_of_class.size(); ++k) {
        for (std::size_t p = 0; p < ds.mode_of_class[k].size(); ++p) {
            if (ds.mode_of_class[k][p] < 0) continue;
            os << k << "," << p << "," << ds.mode_of_class[k][p] << "\n";
        }
    }
}

void write_gmm_metadata_csv(const std::string& path, const GmmDataset& ds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "image_index,condition,mode_id\n";
    for (std::size_t k = 0; k < ds.meta.size(); ++k) {
        os << k << "," << ds.meta[k].condition << "," << ds.meta[k].true_mode << "\n";
    }
}

} // namespace cimle
