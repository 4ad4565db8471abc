#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "macrosent/core.hpp"
#include "macrosent/features.hpp"

namespace macrosent::models {

// Non-owning view of a dense row-major design matrix.
struct DenseView {
    std::span<const double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    DenseView() = default;
    DenseView(std::span<const double> v, std::size_t r, std::size_t c) : values(v), rows(r), cols(c) {
        if (v.size() != r * c) throw DataError("DenseView: value count does not match shape");
    }
    explicit DenseView(const features::FeatureMatrix& m) : DenseView(m.values, m.rows(), m.cols()) {}

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return values.subspan(r * cols, cols); }

    // Rows [begin, end).
    DenseView slice(std::size_t begin, std::size_t end) const {
        return {values.subspan(begin * cols, (end - begin) * cols), end - begin, cols};
    }
};

inline void require_finite(const DenseView& x, const char* who) {
    for (double v : x.values)
        if (!std::isfinite(v)) throw DataError(std::string(who) + ": non-finite feature value");
}

inline void require_two_classes(std::span<const int> y, const char* who) {
    bool zero = false, one = false;
    for (int v : y) {
        if (v != 0 && v != 1) throw DataError(std::string(who) + ": labels must be 0 or 1");
        (v ? one : zero) = true;
    }
    if (!zero || !one) throw DataError(std::string(who) + ": training labels contain a single class");
}

inline bool has_two_classes(std::span<const int> y) {
    bool zero = false, one = false;
    for (int v : y) (v ? one : zero) = true;
    return zero && one;
}

}  // namespace macrosent::models
