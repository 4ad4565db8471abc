#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "macrosent/explain.hpp"
#include "macrosent/features.hpp"
#include "macrosent/models/gbt.hpp"

namespace testsupport {

using macrosent::Date;
using macrosent::features::FeatureMatrix;

// Consecutive weekdays starting 2015-01-05.
inline std::vector<Date> weekdays(std::size_t n) {
    std::vector<Date> out;
    Date d(2015, 1, 5);
    while (out.size() < n) {
        if (d.weekday() >= 1 && d.weekday() <= 5) out.push_back(d);
        d = d.next();
    }
    return out;
}

// Gaussian features; `label_of(row)` decides y, and the next-day return has
// the label's sign with a random magnitude.
template <class LabelFn>
FeatureMatrix planted_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, LabelFn label_of) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    FeatureMatrix m;
    m.dates = weekdays(rows);
    for (std::size_t c = 0; c < cols; ++c) m.names.push_back("x" + std::to_string(c));
    m.values.resize(rows * cols);
    for (auto& v : m.values) v = normal(rng);
    for (std::size_t r = 0; r < rows; ++r) {
        const int y = label_of(m.row(r), rng);
        m.labels.push_back(y);
        const double mag = 0.001 + 0.005 * std::abs(normal(rng));
        m.next_returns.push_back(y ? mag : -mag);
    }
    return m;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Random ensemble with hand-drawn structure and positive covers that are
// consistent (parent = sum of children).
inline macrosent::models::GbtModel random_gbt(std::mt19937_64& rng, std::size_t d, int max_depth, int n_trees) {
    using namespace macrosent::models;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> feat(0, static_cast<int>(d) - 1);
    std::uniform_real_distribution<double> cover(0.5, 20.0);
    GbtModel m;
    m.n_features = d;
    m.base_score = u(rng);
    m.learning_rate = 0.3;
    std::function<int(Tree&, int)> grow = [&](Tree& t, int depth) -> int {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        const bool split = depth < max_depth && (depth == 0 || std::uniform_real_distribution<double>(0, 1)(rng) < 0.7);
        if (!split) {
            t.nodes[id].value = u(rng);
            t.nodes[id].cover = cover(rng);
            return id;
        }
        t.nodes[id].feature = feat(rng);
        t.nodes[id].threshold = u(rng);
        const int l = grow(t, depth + 1);
        const int r = grow(t, depth + 1);
        t.nodes[id].left = l;
        t.nodes[id].right = r;
        t.nodes[id].cover = t.nodes[l].cover + t.nodes[r].cover;
        return id;
    };
    for (int k = 0; k < n_trees; ++k) {
        Tree t;
        grow(t, 0);
        m.trees.push_back(std::move(t));
    }
    return m;
}

// Ensemble trained by boosting on random data, so covers are hessian sums.
inline macrosent::models::GbtModel trained_gbt(std::mt19937_64& rng, std::size_t d, int max_depth, int n_trees,
                                               std::size_t rows = 200) {
    using namespace macrosent::models;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(rows * d);
    for (auto& v : x) v = normal(rng);
    std::vector<int> y(rows);
    for (std::size_t r = 0; r < rows; ++r) y[r] = (x[r * d] + 0.5 * x[r * d + (d - 1)] + 0.7 * normal(rng)) > 0;
    GbtParams p;
    p.max_depth = max_depth;
    p.n_rounds = n_trees;
    p.learning_rate = 0.3;
    return boost(DenseView(x, rows, d), y, p);
}

}  // namespace testsupport
