#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "macrosent/core.hpp"

namespace macrosent {

// Half-open index ranges [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct Fold {
    IndexRange train;
    IndexRange test;
    friend bool operator==(const Fold&, const Fold&) = default;
};

using FoldPlan = std::vector<Fold>;

// Expanding-window split with the arithmetic of scikit-learn's
// TimeSeriesSplit: test blocks of floor(n/(k+1)) rows, the first training
// range absorbing the remainder, every training range starting at 0.
inline FoldPlan expanding_splits(std::size_t n, std::size_t k) {
    if (k < 1) throw UsageError("expanding_splits: need at least one split");
    if (n < 2 * (k + 1))
        throw DataError("expanding_splits: " + std::to_string(n) + " samples are too few for " + std::to_string(k) +
                        " splits (need >= " + std::to_string(2 * (k + 1)) + ")");
    const std::size_t test = n / (k + 1);
    FoldPlan plan;
    plan.reserve(k);
    for (std::size_t i = 1; i <= k; ++i) {
        const std::size_t start = n - (k - i + 1) * test;
        plan.push_back({{0, start}, {start, start + test}});
    }
    return plan;
}

}  // namespace macrosent
