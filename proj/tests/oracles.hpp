#pragma once

// Independent oracles used to freeze expected values: straight-line
// re-implementations, finite differences, and counting checks. These must
// stay decoupled from the library code paths they are used to verify.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "cimle/tensor.hpp"

namespace oracles {

// Central finite difference d f / d x[idx] with step h.
inline double central_diff(const std::function<double()>& f, double& slot,
                           double h = 1e-6) {
    const double saved = slot;
    slot = saved + h;
    const double fp = f();
    slot = saved - h;
    const double fm = f();
    slot = saved;
    return (fp - fm) / (2.0 * h);
}

// Scale-aware relative error: |a-b| / max(1, |a|, |b|).
inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

// Straight-line scalar-loop squared Euclidean distance.
inline double l2_oracle(const cimle::ImageTensor& a, const cimle::ImageTensor& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a.data()[t] - b.data()[t];
        s += d * d;
    }
    return s;
}

// Direct Gaussian summation for an isotropic 3-D KDE.
inline double kde_density_oracle(const std::vector<std::array<double, 3>>& centres,
                                 double h, const std::array<double, 3>& q) {
    double sum = 0.0;
    for (const auto& c : centres) {
        double ss = 0.0;
        for (int t = 0; t < 3; ++t) {
            const double d = q[t] - c[t];
            ss += d * d;
        }
        sum += std::exp(-ss / (2.0 * h * h)) /
               std::pow(2.0 * M_PI * h * h, 1.5);
    }
    return sum / static_cast<double>(centres.size());
}

// Exhaustive argmin with lowest-index tie-breaking.
inline int argmin_oracle(const std::vector<double>& values) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(values.size()); ++j) {
        if (values[j] < values[best]) best = j;
    }
    return best;
}

// Pearson chi-squared statistic against uniform expected counts.
inline double chi2_uniform(const std::vector<long>& counts, long total) {
    const double expected =
        static_cast<double>(total) / static_cast<double>(counts.size());
    double stat = 0.0;
    for (long c : counts) {
        const double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    return stat;
}

} // namespace oracles
