#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "macrosent/models/dataset.hpp"

namespace macrosent::models {

// Binary regression tree stored as a flat node array; node 0 is the root.
// Rows with x[feature] < threshold go left. `cover` is the hessian sum of the
// training rows that reached the node.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double cover = 0.0;

    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        int i = 0;
        while (!nodes[i].is_leaf()) i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }

    int leaf_index(std::span<const double> x) const {
        int i = 0;
        while (!nodes[i].is_leaf()) i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return i;
    }

    // Number of edges on the longest root-to-leaf path.
    int depth() const { return nodes.empty() ? 0 : depth_from(0); }

private:
    int depth_from(int i) const {
        if (nodes[i].is_leaf()) return 0;
        return 1 + std::max(depth_from(nodes[i].left), depth_from(nodes[i].right));
    }
};

struct TreeParams {
    int max_depth = 3;
    double min_child_weight = 1.0;
    double lambda = 1.0;  // L2 on leaf weights
    double alpha = 0.0;   // L1 on leaf weights
    double gamma = 0.0;   // minimum gain to split
};

inline constexpr double kHessianFloor = 1e-16;
// Gains at or below this are treated as rounding noise, not structure.
inline constexpr double kMinSplitGain = 1e-10;

inline double soft_threshold(double g, double alpha) {
    if (g > alpha) return g - alpha;
    if (g < -alpha) return g + alpha;
    return 0.0;
}

inline double leaf_weight(double G, double H, const TreeParams& p) {
    return -soft_threshold(G, p.alpha) / (std::max(H, kHessianFloor) + p.lambda);
}

// Structure score T(G)^2 / (H + lambda).
inline double leaf_score(double G, double H, const TreeParams& p) {
    const double t = soft_threshold(G, p.alpha);
    return t * t / (std::max(H, kHessianFloor) + p.lambda);
}

inline double split_gain(double GL, double HL, double GR, double HR, const TreeParams& p) {
    return 0.5 * (leaf_score(GL, HL, p) + leaf_score(GR, HR, p) - leaf_score(GL + GR, HL + HR, p)) - p.gamma;
}

// Row order of each feature column, ascending by value, ties by row index.
// Computed once per training matrix and reused across boosting rounds.
struct SortedColumns {
    std::vector<std::vector<std::uint32_t>> order;

    explicit SortedColumns(const DenseView& x) : order(x.cols) {
        for (std::size_t f = 0; f < x.cols; ++f) {
            auto& o = order[f];
            o.resize(x.rows);
            std::iota(o.begin(), o.end(), 0u);
            std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x.at(a, f) < x.at(b, f); });
        }
    }
};

namespace detail_tree {

struct Builder {
    const DenseView& x;
    std::span<const double> g;
    std::span<const double> h;
    const TreeParams& params;
    Tree tree;
    std::vector<std::uint8_t> goes_left;

    struct Split {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };

    // `cols[f]` lists the node's rows in ascending order of feature f.
    int build(std::vector<std::vector<std::uint32_t>> cols, int depth) {
        const auto& rows = cols.empty() ? std::vector<std::uint32_t>{} : cols[0];
        double G = 0, H = 0;
        for (auto r : rows) {
            G += g[r];
            H += h[r];
        }
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({-1, 0.0, -1, -1, leaf_weight(G, H, params), H});
        if (depth >= params.max_depth || cols.empty() || H < 2 * params.min_child_weight) return id;

        Split best;
        for (std::size_t f = 0; f < cols.size(); ++f) {
            const auto& order = cols[f];
            double GL = 0, HL = 0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                GL += g[order[i]];
                HL += h[order[i]];
                const double a = x.at(order[i], f);
                const double b = x.at(order[i + 1], f);
                if (!(a < b)) continue;
                const double HR = H - HL;
                if (HL < params.min_child_weight || HR < params.min_child_weight) continue;
                const double gain = split_gain(GL, HL, G - GL, HR, params);
                if (gain > best.gain) {
                    double mid = a + (b - a) / 2.0;
                    if (!(mid > a)) mid = b;
                    best = {gain, static_cast<int>(f), mid};
                }
            }
        }
        if (best.feature < 0 || !(best.gain > kMinSplitGain)) return id;

        for (auto r : rows) goes_left[r] = x.at(r, best.feature) < best.threshold;
        std::vector<std::vector<std::uint32_t>> left(cols.size()), right(cols.size());
        for (std::size_t f = 0; f < cols.size(); ++f) {
            for (auto r : cols[f]) (goes_left[r] ? left[f] : right[f]).push_back(r);
        }
        cols.clear();
        cols.shrink_to_fit();
        tree.nodes[id].feature = best.feature;
        tree.nodes[id].threshold = best.threshold;
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        tree.nodes[id].left = l;
        tree.nodes[id].right = r;
        return id;
    }
};

}  // namespace detail_tree

// Exact greedy second-order regression tree. Candidate thresholds are the
// midpoints between adjacent distinct values; among equal gains the lowest
// feature index and then the lowest threshold wins. Growth stops at
// max_depth, when a child's hessian sum would fall below min_child_weight, or
// when no split has positive gain.
inline Tree fit_regression_tree(const DenseView& x, std::span<const double> gradients, std::span<const double> hessians,
                                const TreeParams& params, const SortedColumns* presorted = nullptr) {
    if (gradients.size() != x.rows || hessians.size() != x.rows)
        throw DataError("fit_regression_tree: gradient/hessian length mismatch");
    for (std::size_t i = 0; i < x.rows; ++i)
        if (!std::isfinite(gradients[i]) || !std::isfinite(hessians[i]) || hessians[i] < 0)
            throw DataError("fit_regression_tree: gradients must be finite and hessians non-negative");
    std::optional<SortedColumns> local;
    if (!presorted) presorted = &local.emplace(x);

    std::vector<std::vector<std::uint32_t>> cols(presorted->order.begin(), presorted->order.end());
    if (x.cols == 0) {
        // no features: a single leaf over all rows
        cols.assign(1, {});
        cols[0].resize(x.rows);
        std::iota(cols[0].begin(), cols[0].end(), 0u);
        TreeParams stump = params;
        stump.max_depth = 0;
        detail_tree::Builder b{x, gradients, hessians, stump, {}, std::vector<std::uint8_t>(x.rows)};
        b.build(std::move(cols), 0);
        return std::move(b.tree);
    }
    detail_tree::Builder b{x, gradients, hessians, params, {}, std::vector<std::uint8_t>(x.rows)};
    b.build(std::move(cols), 0);
    return std::move(b.tree);
}

}  // namespace macrosent::models
