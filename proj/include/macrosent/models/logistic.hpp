#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "macrosent/folds.hpp"
#include "macrosent/models/dataset.hpp"
#include "macrosent/models/metrics.hpp"

namespace macrosent::models {

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double C = 1.0;

    double margin(std::span<const double> x) const {
        double z = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
        return z;
    }
};

struct LogisticObjective {
    double value = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;

    double grad_norm() const {
        double s = grad_b * grad_b;
        for (double g : grad_w) s += g * g;
        return std::sqrt(s);
    }
};

// Mean log-loss plus (1/(2C))*||w||^2 with an unpenalized intercept, and its
// gradient.
inline LogisticObjective logistic_objective(const DenseView& x, std::span<const int> y, std::span<const double> w,
                                            double b, double C) {
    LogisticObjective out;
    out.grad_w.assign(x.cols, 0.0);
    const double n = static_cast<double>(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        double z = b;
        for (std::size_t j = 0; j < x.cols; ++j) z += w[j] * row[j];
        out.value += y[i] ? softplus(-z) : softplus(z);
        const double r = sigmoid(z) - y[i];
        out.grad_b += r;
        for (std::size_t j = 0; j < x.cols; ++j) out.grad_w[j] += r * row[j];
    }
    out.value /= n;
    out.grad_b /= n;
    double ww = 0;
    for (std::size_t j = 0; j < x.cols; ++j) {
        out.grad_w[j] = out.grad_w[j] / n + w[j] / C;
        ww += w[j] * w[j];
    }
    out.value += ww / (2.0 * C);
    return out;
}

struct LogisticFitInfo {
    int iterations = 0;
    double grad_norm = 0.0;
};

inline constexpr double kLogisticTolerance = 1e-8;
inline constexpr int kLogisticMaxIter = 100;

// Damped Newton iterations with Armijo backtracking until the gradient norm
// drops to 1e-8 or 100 iterations elapse.
inline LogisticModel fit_logistic(const DenseView& x, std::span<const int> y, double C, LogisticFitInfo* info = nullptr) {
    if (!(C > 0)) throw UsageError("fit_logistic: C must be positive");
    if (y.size() != x.rows) throw DataError("fit_logistic: label count does not match rows");
    require_finite(x, "fit_logistic");
    require_two_classes(y, "fit_logistic");

    const std::size_t p = x.cols;
    const double n = static_cast<double>(x.rows);
    std::vector<double> w(p, 0.0);
    double b = 0.0;
    auto obj = logistic_objective(x, y, w, b, C);
    int it = 0;
    for (; it < kLogisticMaxIter && obj.grad_norm() > kLogisticTolerance; ++it) {
        // Hessian over (w, b); the intercept occupies the last slot.
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p + 1, p + 1);
        for (std::size_t i = 0; i < x.rows; ++i) {
            const auto row = x.row(i);
            double z = b;
            for (std::size_t j = 0; j < p; ++j) z += w[j] * row[j];
            const double s = sigmoid(z);
            const double d = s * (1.0 - s);
            for (std::size_t j = 0; j < p; ++j) {
                const double dj = d * row[j];
                for (std::size_t k = 0; k <= j; ++k) h(j, k) += dj * row[k];
                h(p, j) += dj;
            }
            h(p, p) += d;
        }
        h /= n;
        for (std::size_t j = 0; j < p; ++j) h(j, j) += 1.0 / C;
        Eigen::VectorXd g(p + 1);
        for (std::size_t j = 0; j < p; ++j) g(j) = obj.grad_w[j];
        g(p) = obj.grad_b;
        const Eigen::VectorXd step = h.selfadjointView<Eigen::Lower>().ldlt().solve(-g);
        const double slope = g.dot(step);

        double t = 1.0;
        std::vector<double> w_new(p);
        LogisticObjective next;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            for (std::size_t j = 0; j < p; ++j) w_new[j] = w[j] + t * step(j);
            next = logistic_objective(x, y, w_new, b + t * step(p), C);
            if (next.value <= obj.value + 1e-4 * t * slope) break;
        }
        if (!(next.value <= obj.value)) break;  // no descent left at machine precision
        w = w_new;
        b += t * step(p);
        obj = std::move(next);
    }
    if (info) *info = {it, obj.grad_norm()};
    return {std::move(w), b, C};
}

inline double predict_proba(const LogisticModel& m, std::span<const double> x) {
    if (x.size() != m.weights.size()) throw DataError("predict_proba: feature count mismatch");
    return sigmoid(m.margin(x));
}

inline std::vector<double> predict_proba(const LogisticModel& m, const DenseView& x) {
    if (x.cols != m.weights.size()) throw DataError("predict_proba: feature count mismatch");
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = sigmoid(m.margin(x.row(i)));
    return out;
}

struct LogisticTuning {
    double chosen_C = 0.0;
    std::vector<double> mean_val_loss;  // per grid entry
};

// Picks C by mean validation log-loss over expanding-window folds of the
// training slice (ties go to the earlier grid entry), then refits on all rows.
// Internal folds whose training part holds a single class are skipped.
inline LogisticModel train_logistic(const DenseView& x, std::span<const int> y, const std::vector<double>& C_grid,
                                    std::size_t inner_splits = 5, LogisticTuning* tuning = nullptr) {
    if (C_grid.empty()) throw UsageError("train_logistic: empty C grid");
    require_two_classes(y, "train_logistic");
    require_finite(x, "train_logistic");
    const auto plan = expanding_splits(x.rows, inner_splits);
    LogisticTuning local;
    double best = std::numeric_limits<double>::infinity();
    local.chosen_C = C_grid.front();
    for (double C : C_grid) {
        double total = 0;
        std::size_t used = 0;
        for (const auto& fold : plan) {
            const auto tr_y = y.subspan(fold.train.begin, fold.train.size());
            if (!has_two_classes(tr_y)) continue;
            const auto m = fit_logistic(x.slice(fold.train.begin, fold.train.end), tr_y, C);
            const auto p = predict_proba(m, x.slice(fold.test.begin, fold.test.end));
            total += logloss(y.subspan(fold.test.begin, fold.test.size()), p);
            ++used;
        }
        const double score = used ? total / static_cast<double>(used) : std::numeric_limits<double>::infinity();
        local.mean_val_loss.push_back(score);
        if (score < best) {
            best = score;
            local.chosen_C = C;
        }
    }
    if (tuning) *tuning = local;
    return fit_logistic(x, y, local.chosen_C);
}

}  // namespace macrosent::models
