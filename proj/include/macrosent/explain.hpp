#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macrosent/core.hpp"
#include "macrosent/csv.hpp"
#include "macrosent/features.hpp"
#include "macrosent/models/dataset.hpp"
#include "macrosent/models/gbt.hpp"
#include "macrosent/models/logistic.hpp"

namespace macrosent::explain {

using models::DenseView;
using models::GbtModel;
using models::Tree;

// Per-row, per-feature attributions in margin (log-odds) units.
struct ShapMatrix {
    std::vector<Date> dates;  // may be empty when rows are undated
    std::vector<std::string> feature_names;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<double> feature_values;
    double base_value = 0.0;
    std::string kind = "tree_shap";

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

// Fraction of a parent's cover that flows to a child. A parent with no cover
// (possible with background-count covers) splits evenly.
inline double cover_ratio(double child, double parent) { return parent > 0 ? child / parent : 0.5; }

// Cover-weighted expectation of a tree's output: what path-dependent SHAP
// treats as the tree's baseline.
inline double expected_value(const Tree& t, int node = 0) {
    const auto& n = t.nodes[node];
    if (n.is_leaf()) return n.value;
    return cover_ratio(t.nodes[n.left].cover, n.cover) * expected_value(t, n.left) +
           cover_ratio(t.nodes[n.right].cover, n.cover) * expected_value(t, n.right);
}

inline double expected_margin(const GbtModel& m) {
    double s = 0;
    for (const auto& t : m.trees) s += expected_value(t);
    return m.base_score + m.learning_rate * s;
}

// Copy of the model with every node's cover replaced by the number of
// background rows reaching it. The expected margin then equals the mean
// margin over the background rows.
inline GbtModel with_background_covers(GbtModel model, const DenseView& background) {
    if (background.rows == 0) throw DataError("with_background_covers: empty background");
    if (background.cols != model.n_features) throw DataError("with_background_covers: feature count mismatch");
    for (auto& t : model.trees) {
        for (auto& n : t.nodes) n.cover = 0;
        for (std::size_t r = 0; r < background.rows; ++r) {
            const auto x = background.row(r);
            int i = 0;
            while (true) {
                t.nodes[i].cover += 1;
                if (t.nodes[i].is_leaf()) break;
                i = x[t.nodes[i].feature] < t.nodes[i].threshold ? t.nodes[i].left : t.nodes[i].right;
            }
        }
    }
    return model;
}

namespace detail_shap {

// One element of the unique decision path: the fractions of "feature absent"
// (zero) and "feature present" (one) paths flowing through, and the
// permutation weight of subsets with a given number of present features.
struct PathElement {
    int feature = -1;
    double zero_fraction = 0;
    double one_fraction = 0;
    double pweight = 0;
};

inline void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction, int feature) {
    path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    for (int i = depth - 1; i >= 0; --i) {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / static_cast<double>(depth + 1);
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / static_cast<double>(depth + 1);
    }
}

inline void unwind_path(PathElement* path, int depth, int path_index) {
    const double one = path[path_index].one_fraction;
    const double zero = path[path_index].zero_fraction;
    double next = path[depth].pweight;
    for (int i = depth - 1; i >= 0; --i) {
        if (one != 0) {
            const double tmp = path[i].pweight;
            path[i].pweight = next * (depth + 1) / ((i + 1) * one);
            next = tmp - path[i].pweight * zero * (depth - i) / static_cast<double>(depth + 1);
        } else {
            path[i].pweight = path[i].pweight * (depth + 1) / (zero * (depth - i));
        }
    }
    for (int i = path_index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

// Total permutation weight if element `path_index` were removed.
inline double unwound_path_sum(const PathElement* path, int depth, int path_index) {
    const double one = path[path_index].one_fraction;
    const double zero = path[path_index].zero_fraction;
    double next = path[depth].pweight;
    double total = 0;
    for (int i = depth - 1; i >= 0; --i) {
        if (one != 0) {
            const double tmp = next * (depth + 1) / ((i + 1) * one);
            total += tmp;
            next = path[i].pweight - tmp * zero * (depth - i) / static_cast<double>(depth + 1);
        } else {
            total += path[i].pweight / zero * (depth + 1) / static_cast<double>(depth - i);
        }
    }
    return total;
}

struct Recursion {
    const Tree& tree;
    std::span<const double> x;
    std::span<double> phi;
    double scale;

    void run(int node, PathElement* parent_path, int depth, double zero_fraction, double one_fraction, int feature) {
        PathElement* path = parent_path + depth;
        std::copy(parent_path, parent_path + depth, path);
        extend_path(path, depth, zero_fraction, one_fraction, feature);
        const auto& n = tree.nodes[node];
        if (n.is_leaf()) {
            for (int i = 1; i <= depth; ++i) {
                const double w = unwound_path_sum(path, depth, i);
                phi[path[i].feature] += w * (path[i].one_fraction - path[i].zero_fraction) * n.value * scale;
            }
            return;
        }
        const bool left = x[n.feature] < n.threshold;
        const int hot = left ? n.left : n.right;
        const int cold = left ? n.right : n.left;
        const double hot_zero = cover_ratio(tree.nodes[hot].cover, n.cover);
        const double cold_zero = cover_ratio(tree.nodes[cold].cover, n.cover);
        double incoming_zero = 1, incoming_one = 1;

        // a feature already on the path is merged rather than duplicated
        int k = 1;
        for (; k <= depth; ++k)
            if (path[k].feature == n.feature) break;
        if (k <= depth) {
            incoming_zero = path[k].zero_fraction;
            incoming_one = path[k].one_fraction;
            unwind_path(path, depth, k);
            --depth;
        }
        // a branch with both fractions zero carries no weight
        if (hot_zero * incoming_zero != 0 || incoming_one != 0)
            run(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one, n.feature);
        if (cold_zero * incoming_zero != 0) run(cold, path, depth + 1, cold_zero * incoming_zero, 0, n.feature);
    }
};

}  // namespace detail_shap

// Path-dependent TreeSHAP over all trees, scaled by the learning rate.
// Adds each feature's attribution for row `x` into `phi`.
inline void tree_shap_row(const GbtModel& model, std::span<const double> x, std::span<double> phi) {
    for (const auto& t : model.trees) {
        const int d = t.depth();
        std::vector<detail_shap::PathElement> buf(static_cast<std::size_t>((d + 2) * (d + 3) / 2));
        detail_shap::Recursion rec{t, x, phi, model.learning_rate};
        rec.run(0, buf.data(), 0, 1.0, 1.0, -1);
    }
}

// Attributions for every row of `x`. Node covers recorded at training time
// define the conditional expectations unless a background set is given, in
// which case covers are recounted from the background rows and base_value is
// their mean margin. Either way base_value + sum(row) equals the row's margin.
inline ShapMatrix tree_shap(const GbtModel& model, const DenseView& x,
                            std::optional<DenseView> background = std::nullopt) {
    if (x.cols != model.n_features) throw DataError("tree_shap: feature count mismatch");
    if (background) {
        return tree_shap(with_background_covers(model, *background), x);
    }
    ShapMatrix out;
    out.rows = x.rows;
    out.cols = x.cols;
    out.values.assign(x.rows * x.cols, 0.0);
    out.feature_values.assign(x.values.begin(), x.values.end());
    out.base_value = expected_margin(model);
    for (std::size_t r = 0; r < x.rows; ++r)
        tree_shap_row(model, x.row(r), std::span<double>(out.values).subspan(r * x.cols, x.cols));
    return out;
}

inline constexpr std::size_t kMaxExactFeatures = 12;

namespace detail_exact {

// Cover-weighted expectation of the tree output when only features in
// `known` (a bitmask) are observed.
inline double conditional_value(const Tree& t, int node, std::span<const double> x, unsigned known) {
    const auto& n = t.nodes[node];
    if (n.is_leaf()) return n.value;
    if (known & (1u << n.feature))
        return conditional_value(t, x[n.feature] < n.threshold ? n.left : n.right, x, known);
    return cover_ratio(t.nodes[n.left].cover, n.cover) * conditional_value(t, n.left, x, known) +
           cover_ratio(t.nodes[n.right].cover, n.cover) * conditional_value(t, n.right, x, known);
}

}  // namespace detail_exact

// Shapley values by enumerating all 2^d feature subsets. Exponential; meant
// as an independent reference for tree_shap with d <= 12.
inline std::vector<double> exact_shapley(const GbtModel& model, std::span<const double> x) {
    const std::size_t d = model.n_features;
    if (d > kMaxExactFeatures) throw UsageError("exact_shapley: at most 12 features supported");
    if (x.size() != d) throw DataError("exact_shapley: feature count mismatch");
    const unsigned subsets = 1u << d;
    std::vector<double> value(subsets);
    for (unsigned s = 0; s < subsets; ++s) {
        double v = 0;
        for (const auto& t : model.trees) v += detail_exact::conditional_value(t, 0, x, s);
        value[s] = model.base_score + model.learning_rate * v;
    }
    // weight(k) = k! (d-k-1)! / d!
    std::vector<double> weight(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        double w = 1.0 / static_cast<double>(d);
        // 1/d * 1/C(d-1, k)
        for (std::size_t i = 1; i <= k; ++i) w *= static_cast<double>(i) / static_cast<double>(d - 1 - k + i);
        weight[k] = w;
    }
    std::vector<double> phi(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const unsigned bit = 1u << i;
        for (unsigned s = 0; s < subsets; ++s) {
            if (s & bit) continue;
            phi[i] += weight[std::popcount(s)] * (value[s | bit] - value[s]);
        }
    }
    return phi;
}

struct RankedFeature {
    std::string feature;
    double mean_abs = 0.0;
};

// Features by descending mean |attribution|; ties by ascending name.
inline std::vector<RankedFeature> shap_global_ranking(const ShapMatrix& shap) {
    if (shap.rows == 0) throw DataError("shap_global_ranking: empty matrix");
    std::vector<RankedFeature> out(shap.cols);
    for (std::size_t c = 0; c < shap.cols; ++c) {
        double s = 0;
        for (std::size_t r = 0; r < shap.rows; ++r) s += std::abs(shap.at(r, c));
        out[c] = {c < shap.feature_names.size() ? shap.feature_names[c] : "f" + std::to_string(c),
                  s / static_cast<double>(shap.rows)};
    }
    std::sort(out.begin(), out.end(), [](const RankedFeature& a, const RankedFeature& b) {
        if (a.mean_abs != b.mean_abs) return a.mean_abs > b.mean_abs;
        return a.feature < b.feature;
    });
    return out;
}

// Linear-model attribution: coefficient times standardized feature value.
// `z` holds the already-scaled rows the model was scored on.
inline ShapMatrix linear_contributions(const models::LogisticModel& model, const DenseView& z) {
    if (z.cols != model.weights.size()) throw DataError("linear_contributions: feature count mismatch");
    ShapMatrix out;
    out.kind = "linear_coef_x_z";
    out.rows = z.rows;
    out.cols = z.cols;
    out.values.resize(z.rows * z.cols);
    out.feature_values.assign(z.values.begin(), z.values.end());
    out.base_value = model.intercept;
    for (std::size_t r = 0; r < z.rows; ++r)
        for (std::size_t c = 0; c < z.cols; ++c) out.values[r * z.cols + c] = model.weights[c] * z.at(r, c);
    return out;
}

// Long format: one line per (date, feature).
inline void write_shap(std::ostream& out, const ShapMatrix& m) {
    csv::write_row(out, {"date", "feature", "shap_value", "feature_value"});
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            csv::write_row(out, {r < m.dates.size() ? m.dates[r].iso() : std::to_string(r), m.feature_names[c],
                                 format_double(m.at(r, c)), format_double(m.feature_values[r * m.cols + c])});
}

inline void write_base_value(std::ostream& out, const ShapMatrix& m) {
    out << "base_value," << format_double(m.base_value) << "\n";
}

inline void write_ranking(std::ostream& out, const std::vector<RankedFeature>& ranking) {
    csv::write_row(out, {"rank", "feature", "mean_abs_shap"});
    for (std::size_t i = 0; i < ranking.size(); ++i)
        csv::write_row(out, {std::to_string(i + 1), ranking[i].feature, format_double(ranking[i].mean_abs)});
}

}  // namespace macrosent::explain
