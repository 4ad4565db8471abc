#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "macrosent/core.hpp"

namespace macrosent::models {

inline constexpr double kProbClip = 1e-12;

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// ln(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Mean binary cross-entropy with probabilities clipped to [1e-12, 1-1e-12].
inline double logloss(std::span<const int> y, std::span<const double> p) {
    if (y.size() != p.size()) throw DataError("logloss: length mismatch");
    if (y.empty()) throw DataError("logloss: empty input");
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double q = std::clamp(p[i], kProbClip, 1.0 - kProbClip);
        s += y[i] ? std::log(q) : std::log1p(-q);
    }
    return -s / static_cast<double>(y.size());
}

// Mean log-loss computed from raw margins; exact where probabilities would
// round to 0 or 1, used for training diagnostics.
inline double logloss_from_margin(std::span<const int> y, std::span<const double> margin) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] ? softplus(-margin[i]) : softplus(margin[i]);
    return s / static_cast<double>(y.size());
}

// Fraction of rows where the 0.5-thresholded probability matches the label
// (p > 0.5 predicts 1).
inline double accuracy(std::span<const int> y, std::span<const double> p) {
    if (y.size() != p.size() || y.empty()) throw DataError("accuracy: bad input lengths");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hit += (p[i] > 0.5 ? 1 : 0) == y[i];
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

// Area under the ROC curve via the rank-sum statistic with midranks for ties.
// NaN when only one class is present.
inline double roc_auc(std::span<const int> y, std::span<const double> p) {
    if (y.size() != p.size()) throw DataError("roc_auc: length mismatch");
    std::vector<std::size_t> idx(y.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    double rank_sum = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && p[idx[j + 1]] == p[idx[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (y[idx[k]]) {
                rank_sum += mid;
                ++pos;
            }
        i = j + 1;
    }
    const std::size_t neg = y.size() - pos;
    if (pos == 0 || neg == 0) return std::nan("");
    const double np = static_cast<double>(pos);
    return (rank_sum - np * (np + 1) / 2.0) / (np * static_cast<double>(neg));
}

}  // namespace macrosent::models
