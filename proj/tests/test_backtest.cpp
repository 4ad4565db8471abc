#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "macrosent/backtest.hpp"
#include "support.hpp"

using namespace macrosent;
using namespace macrosent::backtest;

namespace {

std::vector<DailyStrategyRecord> records_from_nets(const std::vector<double>& nets) {
    std::vector<DailyStrategyRecord> out;
    Date d(2020, 1, 1);
    for (double v : nets) {
        DailyStrategyRecord r;
        r.date = d;
        r.position = 1;
        r.net_return = v;
        out.push_back(r);
        d = d.next();
    }
    return out;
}

std::vector<DailyStrategyRecord> run(const std::vector<int>& pos, const std::vector<double>& ret, double rate) {
    std::vector<Date> dates;
    for (std::size_t i = 0; i < pos.size(); ++i) dates.push_back(Date(2020, 1, 1).plus_days(static_cast<int>(i)));
    const std::vector<double> p(pos.size(), 0.5);
    return net_strategy_returns(dates, p, pos, ret, rate);
}

}  // namespace

TEST(ExpandingSplits, HundredByFive) {
    const auto plan = expanding_splits(100, 5);
    ASSERT_EQ(plan.size(), 5u);
    const std::size_t starts[] = {20, 36, 52, 68, 84};
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(plan[i].train, (IndexRange{0, starts[i]}));
        EXPECT_EQ(plan[i].test, (IndexRange{starts[i], starts[i] + 16}));
    }
}

TEST(ExpandingSplits, SmallBoundary) {
    const auto plan = expanding_splits(12, 5);
    EXPECT_EQ(plan[0].train.size(), 2u);
    EXPECT_EQ(plan[0].test.size(), 2u);
    EXPECT_THROW(expanding_splits(7, 5), DataError);
    EXPECT_THROW(expanding_splits(11, 5), DataError);
    EXPECT_THROW(expanding_splits(100, 0), UsageError);
}

TEST(ExpandingSplits, InvariantsOnRandomSizes) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t k = 1 + rng() % 12;
        const std::size_t n = 2 * (k + 1) + rng() % 3000;
        const auto plan = expanding_splits(n, k);
        const std::size_t t = n / (k + 1);
        ASSERT_EQ(plan.size(), k);
        EXPECT_EQ(plan[0].train.size(), n - k * t);
        EXPECT_EQ(plan.back().test.end, n);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_EQ(plan[i].train.begin, 0u);
            EXPECT_EQ(plan[i].train.end, plan[i].test.begin);
            EXPECT_EQ(plan[i].test.size(), t);
            if (i) EXPECT_EQ(plan[i].test.begin, plan[i - 1].test.end);
        }
    }
}

TEST(Positions, Threshold) {
    EXPECT_EQ(positions_from_proba(0.51), 1);
    EXPECT_EQ(positions_from_proba(0.5), -1);
    EXPECT_EQ(positions_from_proba(0.0), -1);
}

TEST(NetReturns, SingleEntry) {
    const auto r = run({1, 1, 1}, {0.01, -0.02, 0.03}, 0.0002);
    EXPECT_DOUBLE_EQ(r[0].net_return, 0.01 - 0.0002);
    EXPECT_EQ(r[1].net_return, -0.02);
    EXPECT_EQ(r[2].net_return, 0.03);
    EXPECT_EQ(perf_metrics(r, 0.0002).n_trades, 1);
}

TEST(NetReturns, FlipsChargeEveryDay) {
    const auto r = run({1, -1, 1}, {0.01, -0.02, 0.03}, 0.0005);
    EXPECT_DOUBLE_EQ(r[1].net_return, 0.02 - 0.0005);
    for (const auto& x : r) EXPECT_TRUE(x.trade);
    EXPECT_EQ(perf_metrics(r, 0.0005).n_trades, 3);
}

TEST(NetReturns, CostlessLimitAndErrors) {
    const std::vector<double> ret{0.01, -0.02, 0.005};
    const auto r = run({1, -1, -1}, ret, 0.0);
    const int pos[] = {1, -1, -1};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r[i].net_return, pos[i] * ret[i]);
    EXPECT_THROW(run({1, 1}, {0.1}, 0.0), DataError);
    EXPECT_THROW(run({1, 0}, {0.1, 0.1}, 0.0), DataError);
}

TEST(PerfMetrics, SymmetricSeries) {
    const auto m = perf_metrics(records_from_nets({0.01, -0.01, 0.01, -0.01}), 0.0);
    ASSERT_TRUE(m.sharpe);
    EXPECT_NEAR(*m.sharpe, 0.0, 1e-12);
    EXPECT_NEAR(m.total_return, 0.0, 1e-15);
    EXPECT_NEAR(m.win_pct, 50.0, 1e-12);
}

TEST(PerfMetrics, HandEquityWalk) {
    const auto m = perf_metrics(records_from_nets({std::log(1.1), std::log(1 / 1.1), std::log(0.8)}), 0.0);
    EXPECT_NEAR(m.max_drawdown, 0.8 / 1.1 - 1, 1e-12);
    EXPECT_NEAR(m.total_return, -0.2, 1e-12);
    EXPECT_NEAR(m.cagr, std::pow(0.8, 252.0 / 3) - 1, 1e-12);
}

TEST(PerfMetrics, DrawdownFromInitialCapital) {
    const auto m = perf_metrics(records_from_nets({std::log(0.9), std::log(1.0)}), 0.0);
    EXPECT_NEAR(m.max_drawdown, -0.1, 1e-12);
}

TEST(PerfMetrics, ZeroVarianceSharpeUndefined) {
    const auto m = perf_metrics(records_from_nets({0.001, 0.001, 0.001}), 0.0);
    EXPECT_FALSE(m.sharpe);
    EXPECT_THROW(perf_metrics(records_from_nets({0.1}), 0.0), DataError);
    std::ostringstream out;
    BacktestReport r;
    r.metrics = m;
    write_metrics(out, r);
    EXPECT_NE(out.str().find(",NA,"), std::string::npos);
}

TEST(PerfMetrics, SampleConventionsAgainstHandValues) {
    const std::vector<double> nets{0.01, 0.02, -0.005, 0.0};
    const auto m = perf_metrics(records_from_nets(nets), 0.0);
    const double mean = 0.025 / 4;
    double ss = 0;
    for (double v : nets) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / 3);
    EXPECT_NEAR(*m.sharpe, mean / sd * std::sqrt(252.0), 1e-12);
    EXPECT_NEAR(m.ann_vol, sd * std::sqrt(252.0), 1e-15);
    EXPECT_NEAR(m.win_pct, 50.0, 1e-12);
}

TEST(PerfMetrics, CostIdentity) {
    std::vector<int> pos;
    for (int i = 0; i < 400; ++i) pos.push_back(i % 3 == 0 ? 1 : -1);
    const auto r = run(pos, std::vector<double>(400, 0.001), 0.0002);
    const auto m = perf_metrics(r, 0.0002);
    long long trades = 0;
    for (const auto& x : r) trades += x.trade;
    EXPECT_EQ(m.n_trades, trades);
    EXPECT_EQ(m.cum_cost, static_cast<double>(trades) * 0.0002);
}

TEST(PerfMetrics, ConcatenationMatchesRederivedEquity) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0005, 0.01);
    std::vector<double> nets(300);
    for (auto& v : nets) v = n(rng);
    const auto m = perf_metrics(records_from_nets(nets), 0.0);
    double equity = 1, peak = 1, dd = 0;
    for (double v : nets) {
        equity *= std::exp(v);
        peak = std::max(peak, equity);
        dd = std::min(dd, equity / peak - 1);
    }
    EXPECT_NEAR(m.total_return, equity - 1, 1e-10);
    EXPECT_NEAR(m.max_drawdown, dd, 1e-10);
}

TEST(Bootstrap, ConstantSeriesIsDegenerate) {
    const std::vector<double> c(60, 0.002);
    const auto cagr = block_bootstrap_ci(c, BootStatistic::cagr, 200, 20, 0.95, 1);
    ASSERT_TRUE(cagr.lower && cagr.upper);
    EXPECT_DOUBLE_EQ(*cagr.lower, std::exp(0.002 * 252) - 1);
    EXPECT_DOUBLE_EQ(*cagr.upper, *cagr.lower);
    const auto sharpe = block_bootstrap_ci(c, BootStatistic::sharpe, 200, 20, 0.95, 1);
    EXPECT_FALSE(sharpe.lower);
    EXPECT_EQ(sharpe.defined_replicates, 0u);
}

TEST(Bootstrap, LargeEffectExcludesZero) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.05, 0.01);
    std::vector<double> s(500);
    for (auto& v : s) v = n(rng);
    const auto ci = block_bootstrap_ci(s, BootStatistic::sharpe, 1000, 20, 0.95, 9);
    EXPECT_GT(*ci.lower, 0.0);
    EXPECT_FALSE(ci.contains(0.0));
}

TEST(Bootstrap, DeterministicAndSeedSensitive) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 0.01);
    std::vector<double> s(300);
    for (auto& v : s) v = n(rng);
    const auto a = block_bootstrap_ci(s, BootStatistic::sharpe, 300, 20, 0.95, 42);
    const auto b = block_bootstrap_ci(s, BootStatistic::sharpe, 300, 20, 0.95, 42);
    const auto c = block_bootstrap_ci(s, BootStatistic::sharpe, 300, 20, 0.95, 43);
    EXPECT_EQ(*a.lower, *b.lower);
    EXPECT_EQ(*a.upper, *b.upper);
    EXPECT_NE(*a.lower, *c.lower);
    EXPECT_THROW(block_bootstrap_ci(std::vector<double>(10, 0.0), BootStatistic::cagr, 10, 20), DataError);
}

TEST(Bootstrap, PercentileInterpolates) {
    const std::vector<double> v{1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(detail_bt::percentile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(detail_bt::percentile(v, 0.125), 1.5);
    EXPECT_DOUBLE_EQ(detail_bt::percentile(v, 1.0), 5.0);
}

TEST(Bootstrap, BoundedDrawIsUniform) {
    std::mt19937_64 rng(6);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[detail_bt::bounded(rng, 7)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(RunBacktest, ConcatenatesFoldsInOrder) {
    const auto m = testsupport::planted_matrix(240, 3, 7, [](auto x, auto&) { return x[0] > 0 ? 1 : 0; });
    ModelSpec spec;
    spec.kind = ModelSpec::Kind::logistic;
    BacktestConfig cfg;
    cfg.bootstrap_n = 100;
    const auto r = run_backtest(m, spec, cfg);
    ASSERT_EQ(r.folds.size(), 5u);
    const auto plan = expanding_splits(240, 5);
    ASSERT_EQ(r.records.size(), 240 - plan[0].test.begin);
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        EXPECT_EQ(r.records[i].date, m.dates[plan[0].test.begin + i]);
        if (i) EXPECT_LT(r.records[i - 1].date, r.records[i].date);
    }
    long long trades = 0;
    for (const auto& f : r.folds) trades += f.metrics.n_trades;
    EXPECT_EQ(r.metrics.n_trades, trades);
    EXPECT_GT(r.accuracy, 0.9);
}

TEST(RunBacktest, IdenticalRunsAreBitIdentical) {
    const auto m = testsupport::planted_matrix(150, 3, 8, [](auto x, auto& rng) {
        return x[1] + std::normal_distribution<double>(0, 1)(rng) > 0 ? 1 : 0;
    });
    ModelSpec spec;
    spec.gbt_grid.max_depth = {2};
    spec.gbt_grid.learning_rate = {0.1};
    spec.gbt_grid.max_rounds = 60;
    BacktestConfig cfg;
    cfg.bootstrap_n = 100;
    const auto a = run_backtest(m, spec, cfg);
    const auto b = run_backtest(m, spec, cfg);
    std::ostringstream sa, sb;
    write_metrics(sa, a);
    write_daily_records(sa, a.records);
    write_bootstrap(sa, a);
    write_classification(sa, a);
    write_metrics(sb, b);
    write_daily_records(sb, b.records);
    write_bootstrap(sb, b);
    write_classification(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(RunBacktest, FailedFoldNamesIndex) {
    auto m = testsupport::planted_matrix(60, 2, 9, [](auto, auto&) { return 1; });
    ModelSpec spec;
    spec.kind = ModelSpec::Kind::logistic;
    try {
        run_backtest(m, spec, BacktestConfig{});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("fold 1:", 0), 0u);
    }
}

// A fold's model depends on its training labels and on nothing in its test range.
TEST(RunBacktest, FoldModelSensitivity) {
    const auto m = testsupport::planted_matrix(180, 3, 10, [](auto x, auto& rng) {
        return x[0] + std::normal_distribution<double>(0, 0.7)(rng) > 0 ? 1 : 0;
    });
    ModelSpec spec;
    spec.kind = ModelSpec::Kind::logistic;
    const auto plan = expanding_splits(m.rows(), 5);
    const auto& fold = plan[2];
    const auto base = fit_fold(m, fold, spec).to_json().dump();
    auto test_flip = m;
    test_flip.labels[fold.test.begin + 3] ^= 1;
    EXPECT_EQ(fit_fold(test_flip, fold, spec).to_json().dump(), base);
    auto train_flip = m;
    train_flip.labels[fold.train.end - 1] ^= 1;
    EXPECT_NE(fit_fold(train_flip, fold, spec).to_json().dump(), base);
}
