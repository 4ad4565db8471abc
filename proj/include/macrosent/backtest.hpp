#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "macrosent/core.hpp"
#include "macrosent/csv.hpp"
#include "macrosent/features.hpp"
#include "macrosent/folds.hpp"
#include "macrosent/models/gbt.hpp"
#include "macrosent/models/logistic.hpp"
#include "macrosent/models/metrics.hpp"
#include "macrosent/models/serialize.hpp"

namespace macrosent::backtest {

using features::FeatureMatrix;

// +1 (long) strictly above 0.5, otherwise -1 (short).
inline int positions_from_proba(double p) { return p > 0.5 ? 1 : -1; }

struct DailyStrategyRecord {
    Date date;  // feature date t; the position is held over t -> t+1
    double proba = 0.0;
    int position = 0;
    double market_return = 0.0;  // r_{t+1}
    bool trade = false;
    double net_return = 0.0;
};

// Position * market log return, less cost_rate on every day whose position
// differs from the previous day's (the first day always trades).
inline std::vector<DailyStrategyRecord> net_strategy_returns(std::span<const Date> dates, std::span<const double> proba,
                                                             std::span<const int> positions,
                                                             std::span<const double> returns, double cost_rate) {
    if (dates.size() != positions.size() || proba.size() != positions.size() || returns.size() != positions.size())
        throw DataError("net_strategy_returns: series are not aligned");
    if (!(cost_rate >= 0)) throw UsageError("net_strategy_returns: cost_rate must be >= 0");
    std::vector<DailyStrategyRecord> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] != 1 && positions[i] != -1) throw DataError("net_strategy_returns: positions must be +1 or -1");
        auto& r = out[i];
        r.date = dates[i];
        r.proba = proba[i];
        r.position = positions[i];
        r.market_return = returns[i];
        r.trade = i == 0 || positions[i] != positions[i - 1];
        r.net_return = r.position * r.market_return - (r.trade ? cost_rate : 0.0);
    }
    return out;
}

struct PerfMetrics {
    double cagr = 0.0;
    std::optional<double> sharpe;  // undefined for a zero-variance series
    double ann_vol = 0.0;
    double max_drawdown = 0.0;
    double win_pct = 0.0;
    double total_return = 0.0;
    long long n_trades = 0;
    double cum_cost = 0.0;
    std::size_t n_days = 0;
};

namespace detail_bt {

inline double mean(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline std::optional<double> sharpe(std::span<const double> net, double periods) {
    if (std::adjacent_find(net.begin(), net.end(), std::not_equal_to<>()) == net.end()) return std::nullopt;
    const double sd = sample_std(net);
    if (!(sd > 0)) return std::nullopt;
    return mean(net) / sd * std::sqrt(periods);
}

inline double cagr(std::span<const double> net, double periods) {
    double s = 0;
    for (double x : net) s += x;
    return std::exp(s * periods / static_cast<double>(net.size())) - 1.0;
}

}  // namespace detail_bt

// Equity starts at 1.0 and compounds the daily net log returns. Drawdown is
// measured against the running peak, the initial capital included.
inline PerfMetrics perf_metrics(std::span<const DailyStrategyRecord> records, double cost_rate,
                                double periods_per_year = kTradingDaysPerYear) {
    if (records.size() < 2) throw DataError("perf_metrics: need at least 2 records");
    std::vector<double> net(records.size());
    PerfMetrics m;
    m.n_days = records.size();
    double log_equity = 0, peak = 1.0, wins = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        net[i] = records[i].net_return;
        log_equity += net[i];
        const double equity = std::exp(log_equity);
        peak = std::max(peak, equity);
        m.max_drawdown = std::min(m.max_drawdown, equity / peak - 1.0);
        if (net[i] > 0) wins += 1;
        if (records[i].trade) ++m.n_trades;
    }
    m.total_return = std::exp(log_equity) - 1.0;
    m.cagr = detail_bt::cagr(net, periods_per_year);
    m.sharpe = detail_bt::sharpe(net, periods_per_year);
    m.ann_vol = detail_bt::sample_std(net) * std::sqrt(periods_per_year);
    m.win_pct = 100.0 * wins / static_cast<double>(records.size());
    m.cum_cost = static_cast<double>(m.n_trades) * cost_rate;
    return m;
}

enum class BootStatistic { sharpe, cagr };

inline const char* to_string(BootStatistic s) { return s == BootStatistic::sharpe ? "sharpe" : "cagr"; }

struct BootstrapInterval {
    BootStatistic statistic = BootStatistic::sharpe;
    std::optional<double> lower;  // empty when no replicate had a defined statistic
    std::optional<double> upper;
    std::size_t n_boot = 0;
    std::size_t block = 0;
    double level = 0.95;
    std::uint64_t seed = 0;
    std::size_t defined_replicates = 0;

    bool contains(double v) const { return lower && upper && *lower <= v && v <= *upper; }
};

namespace detail_bt {

// Uniform integer in [0, bound) by rejection; identical on every platform.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do v = rng();
    while (v >= limit);
    return v % bound;
}

// Linear interpolation between closest ranks of a sorted sample.
inline double percentile(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail_bt

// Moving-block bootstrap: each replicate concatenates ceil(n/block) blocks
// with uniformly drawn (overlapping) start indices and truncates to n.
// Replicate r draws from its own generator seeded by (seed, r).
inline BootstrapInterval block_bootstrap_ci(std::span<const double> series, BootStatistic statistic,
                                            std::size_t n_boot = 1000, std::size_t block = 20, double level = 0.95,
                                            std::uint64_t seed = 0, double periods_per_year = kTradingDaysPerYear) {
    if (block == 0) throw UsageError("block_bootstrap_ci: block must be >= 1");
    if (series.size() < block)
        throw DataError("block_bootstrap_ci: series of " + std::to_string(series.size()) + " is shorter than block " +
                        std::to_string(block));
    if (!(level > 0 && level < 1)) throw UsageError("block_bootstrap_ci: level must be in (0, 1)");
    const std::size_t n = series.size();
    const std::size_t starts = n - block + 1;
    const std::size_t n_blocks = (n + block - 1) / block;
    std::vector<double> stats;
    stats.reserve(n_boot);
    std::vector<double> sample(n);
    for (std::size_t r = 0; r < n_boot; ++r) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(std::uint64_t(r) >> 32)};
        std::mt19937_64 rng(seq);
        std::size_t k = 0;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t s = detail_bt::bounded(rng, starts);
            for (std::size_t j = 0; j < block && k < n; ++j) sample[k++] = series[s + j];
        }
        if (statistic == BootStatistic::cagr) {
            stats.push_back(detail_bt::cagr(sample, periods_per_year));
        } else if (n >= 2) {
            if (auto s = detail_bt::sharpe(sample, periods_per_year)) stats.push_back(*s);
        }
    }
    BootstrapInterval out{statistic, std::nullopt, std::nullopt, n_boot, block, level, seed, stats.size()};
    if (stats.empty()) return out;
    std::sort(stats.begin(), stats.end());
    const double tail = (1.0 - level) / 2.0;
    out.lower = detail_bt::percentile(stats, tail);
    out.upper = detail_bt::percentile(stats, 1.0 - tail);
    return out;
}

struct ModelSpec {
    enum class Kind { logistic, gbt };
    Kind kind = Kind::gbt;
    std::vector<double> C_grid{0.01, 0.1, 1.0, 10.0};
    models::GbtGrid gbt_grid;
    int early_stop_rounds = 50;
    std::size_t inner_splits = 5;
};

inline const char* to_string(ModelSpec::Kind k) { return k == ModelSpec::Kind::logistic ? "logistic" : "gbt"; }

// A fold's trained model. Logistic models carry the training-set scaler.
struct FittedModel {
    std::variant<models::LogisticModel, models::GbtModel> model;
    std::optional<features::Scaler> scaler;
    std::string hyperparameters;

    std::vector<double> predict(const FeatureMatrix& rows) const {
        if (const auto* lr = std::get_if<models::LogisticModel>(&model)) {
            const auto scaled = scaler ? features::apply_scaler(*scaler, rows) : rows;
            return models::predict_proba(*lr, models::DenseView(scaled));
        }
        return models::predict_proba(std::get<models::GbtModel>(model), models::DenseView(rows));
    }

    nlohmann::ordered_json to_json() const {
        if (const auto* lr = std::get_if<models::LogisticModel>(&model))
            return models::to_json(*lr, scaler ? &*scaler : nullptr);
        return models::to_json(std::get<models::GbtModel>(model));
    }

    static FittedModel from_json(const nlohmann::ordered_json& j) {
        FittedModel f;
        if (j.at("type").get<std::string>() == "logistic") {
            f.model = models::logistic_from_json(j, &f.scaler);
        } else {
            f.model = models::gbt_from_json(j);
        }
        return f;
    }
};

// Tunes and fits on `train` only: z-scoring with training statistics for the
// logistic model, expanding-window inner CV for hyperparameters.
inline FittedModel fit_model(const FeatureMatrix& train, const ModelSpec& spec) {
    FittedModel out;
    if (spec.kind == ModelSpec::Kind::logistic) {
        auto scaler = features::fit_scaler(train);
        const auto z = features::apply_scaler(scaler, train);
        models::LogisticTuning tuning;
        out.model = models::train_logistic(models::DenseView(z), z.labels, spec.C_grid, spec.inner_splits, &tuning);
        out.scaler = std::move(scaler);
        out.hyperparameters = "C=" + format_double(tuning.chosen_C);
    } else {
        models::GbtTuning tuning;
        out.model = models::train_gbt(models::DenseView(train), train.labels, spec.gbt_grid, spec.early_stop_rounds,
                                      spec.inner_splits, &tuning);
        const auto& c = tuning.chosen;
        out.hyperparameters = "max_depth=" + std::to_string(c.max_depth) + ";learning_rate=" + format_double(c.learning_rate) +
                              ";lambda=" + format_double(c.lambda) + ";alpha=" + format_double(c.alpha) +
                              ";n_rounds=" + std::to_string(c.n_rounds);
    }
    return out;
}

// Fits the model for one fold of `matrix`. Only rows in fold.train are read.
inline FittedModel fit_fold(const FeatureMatrix& matrix, const Fold& fold, const ModelSpec& spec) {
    return fit_model(matrix.slice(fold.train.begin, fold.train.end), spec);
}

struct FoldResult {
    std::size_t index = 0;  // 1-based
    Fold fold;
    FittedModel model;
    std::vector<DailyStrategyRecord> records;
    PerfMetrics metrics;
    double accuracy = 0.0;
    double auc = 0.0;
};

struct BacktestConfig {
    double cost_rate = 0.0002;
    std::size_t k_splits = 5;
    std::size_t bootstrap_n = 1000;
    std::size_t bootstrap_block = 20;
    double bootstrap_level = 0.95;
    std::uint64_t seed = 0;
};

struct BacktestReport {
    ModelSpec::Kind model = ModelSpec::Kind::gbt;
    double cost_rate = 0.0;
    std::vector<FoldResult> folds;
    std::vector<DailyStrategyRecord> records;  // fold test records, concatenated
    PerfMetrics metrics;
    double accuracy = 0.0;
    double auc = 0.0;
    BootstrapInterval sharpe_ci;
    BootstrapInterval cagr_ci;
};

// Scores a fold's test rows with its fitted model.
inline std::vector<DailyStrategyRecord> score_fold(const FeatureMatrix& matrix, const Fold& fold, const FittedModel& model,
                                                   double cost_rate, std::vector<double>* proba_out = nullptr) {
    const auto test = matrix.slice(fold.test.begin, fold.test.end);
    const auto proba = model.predict(test);
    std::vector<int> pos(proba.size());
    std::transform(proba.begin(), proba.end(), pos.begin(), positions_from_proba);
    if (proba_out) *proba_out = proba;
    return net_strategy_returns(test.dates, proba, pos, test.next_returns, cost_rate);
}

// Expanding-window walk-forward evaluation over the rows of `matrix`.
inline BacktestReport run_backtest(const FeatureMatrix& matrix, const ModelSpec& spec, const BacktestConfig& cfg) {
    if (cfg.k_splits < 2) throw UsageError("run_backtest: k_splits must be >= 2");
    const auto plan = expanding_splits(matrix.rows(), cfg.k_splits);
    BacktestReport report;
    report.model = spec.kind;
    report.cost_rate = cfg.cost_rate;
    std::vector<double> all_proba;
    std::vector<int> all_labels;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        FoldResult fr;
        fr.index = i + 1;
        fr.fold = plan[i];
        try {
            fr.model = fit_fold(matrix, plan[i], spec);
        } catch (const std::exception& e) {
            throw DataError("fold " + std::to_string(i + 1) + ": " + e.what());
        }
        std::vector<double> proba;
        fr.records = score_fold(matrix, plan[i], fr.model, cfg.cost_rate, &proba);
        fr.metrics = perf_metrics(fr.records, cfg.cost_rate);
        const std::span<const int> labels(matrix.labels.data() + plan[i].test.begin, plan[i].test.size());
        fr.accuracy = models::accuracy(labels, proba);
        fr.auc = models::roc_auc(labels, proba);
        report.records.insert(report.records.end(), fr.records.begin(), fr.records.end());
        all_proba.insert(all_proba.end(), proba.begin(), proba.end());
        all_labels.insert(all_labels.end(), labels.begin(), labels.end());
        report.folds.push_back(std::move(fr));
    }
    report.metrics = perf_metrics(report.records, cfg.cost_rate);
    report.accuracy = models::accuracy(all_labels, all_proba);
    report.auc = models::roc_auc(all_labels, all_proba);
    std::vector<double> net(report.records.size());
    std::transform(report.records.begin(), report.records.end(), net.begin(),
                   [](const DailyStrategyRecord& r) { return r.net_return; });
    report.sharpe_ci = block_bootstrap_ci(net, BootStatistic::sharpe, cfg.bootstrap_n, cfg.bootstrap_block,
                                          cfg.bootstrap_level, cfg.seed);
    report.cagr_ci = block_bootstrap_ci(net, BootStatistic::cagr, cfg.bootstrap_n, cfg.bootstrap_block,
                                        cfg.bootstrap_level, cfg.seed);
    return report;
}

// Column names follow the published results table.
inline const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> cols = {"CAGR (%)",      "Sharpe",    "Vol (%)", "Max DD (%)",
                                                  "Win (%)",       "Total Ret. (%)", "# Trades", "Cost"};
    return cols;
}

inline csv::Row metrics_cells(const PerfMetrics& m) {
    return {format_double(100 * m.cagr),       m.sharpe ? format_double(*m.sharpe) : "NA",
            format_double(100 * m.ann_vol),    format_double(100 * m.max_drawdown),
            format_double(m.win_pct),          format_double(100 * m.total_return),
            std::to_string(m.n_trades),        format_double(m.cum_cost)};
}

inline void write_metrics(std::ostream& out, const BacktestReport& r) {
    csv::Row header{"fold"};
    header.insert(header.end(), metrics_columns().begin(), metrics_columns().end());
    csv::write_row(out, header);
    for (const auto& f : r.folds) {
        csv::Row row{std::to_string(f.index)};
        const auto cells = metrics_cells(f.metrics);
        row.insert(row.end(), cells.begin(), cells.end());
        csv::write_row(out, row);
    }
    csv::Row row{"aggregate"};
    const auto cells = metrics_cells(r.metrics);
    row.insert(row.end(), cells.begin(), cells.end());
    csv::write_row(out, row);
}

inline void write_daily_records(std::ostream& out, std::span<const DailyStrategyRecord> records) {
    csv::write_row(out, {"date", "proba", "position", "market_ret", "net_ret", "trade"});
    for (const auto& r : records)
        csv::write_row(out, {r.date.iso(), format_double(r.proba), std::to_string(r.position),
                             format_double(r.market_return), format_double(r.net_return), r.trade ? "1" : "0"});
}

inline void write_bootstrap(std::ostream& out, const BacktestReport& r) {
    csv::write_row(out, {"statistic", "lower", "upper", "n_boot", "block", "seed", "level"});
    for (const auto* ci : {&r.sharpe_ci, &r.cagr_ci})
        csv::write_row(out, {to_string(ci->statistic), ci->lower ? format_double(*ci->lower) : "NA",
                             ci->upper ? format_double(*ci->upper) : "NA", std::to_string(ci->n_boot),
                             std::to_string(ci->block), std::to_string(ci->seed), format_double(ci->level)});
}

inline void write_classification(std::ostream& out, const BacktestReport& r) {
    csv::write_row(out, {"fold", "train_end", "test_begin", "test_end", "accuracy", "auc", "hyperparameters"});
    const auto nan_or = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
    for (const auto& f : r.folds)
        csv::write_row(out, {std::to_string(f.index), std::to_string(f.fold.train.end), std::to_string(f.fold.test.begin),
                             std::to_string(f.fold.test.end), nan_or(f.accuracy), nan_or(f.auc), f.model.hyperparameters});
    csv::write_row(out, {"aggregate", "", "", "", nan_or(r.accuracy), nan_or(r.auc), ""});
}

}  // namespace macrosent::backtest
