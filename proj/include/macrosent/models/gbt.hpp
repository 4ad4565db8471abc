#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macrosent/folds.hpp"
#include "macrosent/models/dataset.hpp"
#include "macrosent/models/metrics.hpp"
#include "macrosent/models/tree.hpp"

namespace macrosent::models {

struct GbtParams {
    int max_depth = 3;
    double learning_rate = 0.1;
    double lambda = 1.0;
    double alpha = 0.0;
    double min_child_weight = 1.0;
    double gamma = 0.0;
    int n_rounds = 500;

    TreeParams tree() const { return {max_depth, min_child_weight, lambda, alpha, gamma}; }
    friend bool operator==(const GbtParams&, const GbtParams&) = default;
};

// Additive ensemble: margin = base_score + learning_rate * sum of tree outputs.
struct GbtModel {
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::size_t n_features = 0;
    GbtParams params;
    std::vector<Tree> trees;

    double margin(std::span<const double> x) const {
        double s = 0;
        for (const auto& t : trees) s += t.predict(x);
        return base_score + learning_rate * s;
    }
};

inline double predict_proba(const GbtModel& m, std::span<const double> x) {
    if (x.size() != m.n_features) throw DataError("predict_proba: feature count mismatch");
    return sigmoid(m.margin(x));
}

inline std::vector<double> predict_proba(const GbtModel& m, const DenseView& x) {
    if (x.cols != m.n_features) throw DataError("predict_proba: feature count mismatch");
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = sigmoid(m.margin(x.row(i)));
    return out;
}

// Log-odds of the positive-class share, with the share clipped away from 0 and 1.
inline double prevalence_log_odds(std::span<const int> y) {
    double pos = 0;
    for (int v : y) pos += v;
    const double p = std::clamp(pos / static_cast<double>(y.size()), kProbClip, 1.0 - kProbClip);
    return std::log(p / (1.0 - p));
}

struct BoostHistory {
    std::vector<double> train_loss;       // after each round, from margins
    std::vector<double> validation_loss;  // empty without a validation set
    std::size_t best_rounds = 0;          // tree count kept
};

struct Validation {
    DenseView x;
    std::span<const int> y;
};

// Boosts up to params.n_rounds trees on the logistic loss (g = p - y,
// h = p(1 - p)). With a validation set and early_stop_rounds > 0, training
// stops once validation log-loss has not improved for that many rounds and
// the model is truncated to the best round.
inline GbtModel boost(const DenseView& x, std::span<const int> y, const GbtParams& params,
                      std::optional<Validation> validation = std::nullopt, int early_stop_rounds = 0,
                      BoostHistory* history = nullptr) {
    if (y.size() != x.rows) throw DataError("boost: label count does not match rows");
    if (x.rows == 0) throw DataError("boost: empty training set");
    if (params.learning_rate <= 0 || params.learning_rate > 1) throw UsageError("boost: learning_rate must be in (0, 1]");
    GbtModel model;
    model.base_score = prevalence_log_odds(y);
    model.learning_rate = params.learning_rate;
    model.n_features = x.cols;
    model.params = params;

    const SortedColumns sorted(x);
    const TreeParams tp = params.tree();
    std::vector<double> margin(x.rows, model.base_score), g(x.rows), h(x.rows);
    std::vector<double> val_margin;
    if (validation) val_margin.assign(validation->x.rows, model.base_score);

    BoostHistory local;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_rounds = 0;
    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double p = sigmoid(margin[i]);
            g[i] = p - y[i];
            h[i] = p * (1.0 - p);
        }
        Tree tree = fit_regression_tree(x, g, h, tp, &sorted);
        for (std::size_t i = 0; i < x.rows; ++i) margin[i] += params.learning_rate * tree.predict(x.row(i));
        model.trees.push_back(std::move(tree));
        local.train_loss.push_back(logloss_from_margin(y, margin));

        if (validation) {
            const auto& t = model.trees.back();
            for (std::size_t i = 0; i < validation->x.rows; ++i)
                val_margin[i] += params.learning_rate * t.predict(validation->x.row(i));
            std::vector<double> p(val_margin.size());
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(val_margin[i]);
            const double loss = logloss(validation->y, p);
            local.validation_loss.push_back(loss);
            if (loss < best_val) {
                best_val = loss;
                best_rounds = model.trees.size();
            } else if (early_stop_rounds > 0 &&
                       model.trees.size() - best_rounds >= static_cast<std::size_t>(early_stop_rounds)) {
                break;
            }
        }
    }
    if (validation && early_stop_rounds > 0) model.trees.resize(best_rounds);
    local.best_rounds = model.trees.size();
    if (history) *history = std::move(local);
    return model;
}

struct GbtGrid {
    std::vector<int> max_depth{2, 3, 4};
    std::vector<double> learning_rate{0.05, 0.1};
    std::vector<double> lambda{1.0};
    std::vector<double> alpha{0.0};
    double min_child_weight = 1.0;
    double gamma = 0.0;
    int max_rounds = 500;

    std::vector<GbtParams> points() const {
        std::vector<GbtParams> out;
        for (int d : max_depth)
            for (double eta : learning_rate)
                for (double l2 : lambda)
                    for (double l1 : alpha) out.push_back({d, eta, l2, l1, min_child_weight, gamma, max_rounds});
        return out;
    }
};

struct GbtTuning {
    GbtParams chosen;
    std::vector<GbtParams> points;
    std::vector<int> rounds;              // per grid point, from early stopping
    std::vector<double> mean_val_loss;    // per grid point
};

// Grid search over expanding-window folds of the training slice. For each
// grid point the round count comes from early stopping on the last internal
// fold; every fold is then scored at that count and the point with the best
// mean validation log-loss is refit on all rows. Ties keep the earlier point.
inline GbtModel train_gbt(const DenseView& x, std::span<const int> y, const GbtGrid& grid, int early_stop_rounds = 50,
                          std::size_t inner_splits = 5, GbtTuning* tuning = nullptr) {
    const auto points = grid.points();
    if (points.empty()) throw UsageError("train_gbt: empty hyperparameter grid");
    require_two_classes(y, "train_gbt");
    require_finite(x, "train_gbt");
    const auto plan = expanding_splits(x.rows, inner_splits);
    const auto& last = plan.back();

    GbtTuning local;
    local.points = points;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t gi = 0; gi < points.size(); ++gi) {
        const auto& gp = points[gi];
        BoostHistory hist;
        boost(x.slice(last.train.begin, last.train.end), y.subspan(last.train.begin, last.train.size()), gp,
              Validation{x.slice(last.test.begin, last.test.end), y.subspan(last.test.begin, last.test.size())},
              early_stop_rounds, &hist);
        const int rounds = static_cast<int>(hist.best_rounds);
        double total = 0;
        std::size_t used = 0;
        for (const auto& fold : plan) {
            const auto tr_y = y.subspan(fold.train.begin, fold.train.size());
            if (!has_two_classes(tr_y)) continue;
            GbtParams fixed = gp;
            fixed.n_rounds = rounds;
            const auto m = boost(x.slice(fold.train.begin, fold.train.end), tr_y, fixed);
            total += logloss(y.subspan(fold.test.begin, fold.test.size()),
                             predict_proba(m, x.slice(fold.test.begin, fold.test.end)));
            ++used;
        }
        const double score = used ? total / static_cast<double>(used) : std::numeric_limits<double>::infinity();
        local.rounds.push_back(rounds);
        local.mean_val_loss.push_back(score);
        if (score < best) {
            best = score;
            best_i = gi;
        }
    }
    local.chosen = points[best_i];
    local.chosen.n_rounds = local.rounds[best_i];
    if (tuning) *tuning = local;
    return boost(x, y, local.chosen);
}

}  // namespace macrosent::models
