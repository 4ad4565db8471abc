// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any check fails.
#include <chrono>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "macrosent/backtest.hpp"
#include "macrosent/config.hpp"
#include "macrosent/explain.hpp"
#include "macrosent/pipeline.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace macrosent;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const fs::path kRoot = MACROSENT_SOURCE_DIR;

// ---------------------------------------------------------------------------

Outcome shap_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0, worst_eff = 0;
    for (int k = 0; k < 50; ++k) {
        const std::size_t d = 1 + rng() % 8;
        const int depth = 1 + static_cast<int>(rng() % 3);
        const int trees = 1 + static_cast<int>(rng() % 5);
        const auto model = testsupport::random_gbt(rng, d, depth, trees);
        std::vector<double> x(20 * d);
        for (auto& v : x) v = normal(rng);
        const auto shap = explain::tree_shap(model, models::DenseView(x, 20, d));
        for (std::size_t r = 0; r < 20; ++r) {
            const std::span<const double> row(x.data() + r * d, d);
            const auto oracle = explain::exact_shapley(model, row);
            double sum = shap.base_value;
            for (std::size_t j = 0; j < d; ++j) {
                worst = std::max(worst, std::abs(shap.at(r, j) - oracle[j]));
                sum += shap.at(r, j);
            }
            worst_eff = std::max(worst_eff, std::abs(sum - model.margin(row)));
        }
    }
    const double secs = seconds_since(t0);
    o.require(worst <= 1e-9, "max |tree_shap - exact| = " + format_double(worst));
    o.require(worst_eff <= 1e-6, "max efficiency gap = " + format_double(worst_eff));
    o.require(secs < 60, "took " + format_double(secs) + " s");
    if (o.pass) o.detail = "max diff " + format_double(worst) + ", " + format_fixed(secs, 2) + " s";
    return o;
}

Outcome cost_identity() {
    Outcome o;
    struct Triple {
        long long trades;
        double rate;
        double printed;
    };
    for (const auto& t : {Triple{1186, 0.0002, 0.237}, Triple{215, 0.0002, 0.043}, Triple{778, 0.0005, 0.389},
                          Triple{1043, 0.0005, 0.522}}) {
        const std::size_t n = static_cast<std::size_t>(t.trades) + 25;
        std::vector<Date> dates;
        Date d(2015, 1, 1);
        for (std::size_t i = 0; i < n; ++i, d = d.next()) dates.push_back(d);
        // Flip on each of the first `trades` days, then hold.
        std::vector<int> pos(n);
        for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<long long>(i) < t.trades ? (i % 2 ? -1 : 1) : pos[i - 1];
        const std::vector<double> proba(n, 0.5), ret(n, 0.001);
        const auto records = backtest::net_strategy_returns(dates, proba, pos, ret, t.rate);
        const auto m = backtest::perf_metrics(records, t.rate);
        o.require(m.n_trades == t.trades, "trade count " + std::to_string(m.n_trades));
        o.require(m.cum_cost == static_cast<double>(t.trades) * t.rate, "cum_cost is not trades x rate");
        o.require(std::abs(m.cum_cost - t.printed) <= 0.0005 + 1e-12,
                  format_double(m.cum_cost) + " does not round to " + format_fixed(t.printed, 3));
    }
    return o;
}

Outcome split_arithmetic() {
    Outcome o;
    const auto plan = expanding_splits(100, 5);
    const std::size_t starts[] = {20, 36, 52, 68, 84};
    o.require(plan.size() == 5, "fold count");
    for (std::size_t i = 0; i < plan.size(); ++i)
        o.require(plan[i].train == IndexRange{0, starts[i]} && plan[i].test == IndexRange{starts[i], starts[i] + 16},
                  "n=100 fold " + std::to_string(i + 1));
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng() % 19;
        const std::size_t n = 2 * (k + 1) + rng() % 5000;
        const auto p = expanding_splits(n, k);
        const std::size_t t = n / (k + 1);
        const std::string tag = "n=" + std::to_string(n) + " k=" + std::to_string(k);
        o.require(p.size() == k, tag + ": fold count");
        o.require(p.back().test.end == n, tag + ": last test end");
        for (std::size_t i = 0; i < p.size(); ++i) {
            o.require(p[i].train.begin == 0 && p[i].train.end == p[i].test.begin, tag + ": train range");
            o.require(p[i].train.size() >= t, tag + ": train smaller than test");
            o.require(p[i].test.size() == t, tag + ": test size");
            if (i) o.require(p[i].test.begin == p[i - 1].test.end, tag + ": test blocks not contiguous");
        }
    }
    return o;
}

// --- no look-ahead -----------------------------------------------------------

struct FixtureInputs {
    std::vector<sentiment::ScoredHeadline> scored;
    std::vector<market::PriceBar> prices;
    RunConfig config;
};

RunConfig fixture_config(const fs::path& out) {
    auto c = load_config((kRoot / "data/fixtures/fixture.cfg").string());
    c.events = (kRoot / c.events).string();
    c.headline_store = (kRoot / c.headline_store).string();
    c.prices = (kRoot / c.prices).string();
    c.lexicon = (kRoot / c.lexicon).string();
    c.out = out.string();
    return c;
}

FixtureInputs fixture_inputs() {
    const auto tmp = fs::temp_directory_path() / "macrosent_accept_inputs";
    fs::remove_all(tmp);
    FixtureInputs in;
    in.config = fixture_config(tmp);
    std::ostringstream log;
    pipeline::cmd_ingest(in.config, log);
    pipeline::cmd_score(in.config, log);
    in.scored = sentiment::load_headline_scores((pipeline::asset_dir(in.config) / "scores.jsonl").string()).headlines;
    in.prices = market::load_prices(in.config.prices);
    fs::remove_all(tmp);
    return in;
}

Outcome no_lookahead_features(const FixtureInputs& in) {
    Outcome o;
    const auto base = pipeline::build_features(in.scored, in.prices, in.config);
    const std::size_t cut = in.prices.size() * 2 / 3;
    const Date cutoff = in.prices[cut].date;
    auto scored = in.scored;
    for (auto& h : scored)
        if (!(h.date < cutoff)) {
            std::swap(h.probs.p_neg, h.probs.p_pos);
            h.polarity = -h.polarity;
            h.goldstein_scale = -h.goldstein_scale + 1.0;
        }
    auto prices = in.prices;
    for (std::size_t i = cut; i < prices.size(); ++i) prices[i].close *= 1.0 + 0.03 * std::sin(static_cast<double>(i));
    const auto perturbed = pipeline::build_features(scored, prices, in.config);
    // Row t's label and next return use the bar after t, so the row just
    // before the cutoff shares features but not its target.
    std::size_t checked = 0;
    for (std::size_t r = 0; r < base.rows() && base.dates[r] < in.prices[cut - 1].date; ++r) {
        o.require(r < perturbed.rows() && perturbed.dates[r] == base.dates[r], "row dates differ");
        if (!o.pass) return o;
        for (std::size_t c = 0; c < base.cols(); ++c)
            o.require(std::memcmp(&base.values[r * base.cols() + c], &perturbed.values[r * base.cols() + c],
                                  sizeof(double)) == 0,
                      "feature " + base.names[c] + " changed on " + base.dates[r].iso());
        o.require(base.labels[r] == perturbed.labels[r] && base.next_returns[r] == perturbed.next_returns[r],
                  "target changed on " + base.dates[r].iso());
        ++checked;
    }
    o.require(checked > 100, "too few rows compared");
    bool any_late_change = base.values != perturbed.values;
    o.require(any_late_change, "perturbation had no effect");
    if (o.pass) o.detail = std::to_string(checked) + " rows unchanged";
    return o;
}

Outcome no_lookahead_models() {
    Outcome o;
    const auto m = testsupport::planted_matrix(400, 4, 31, [](auto x, auto& rng) {
        return x[0] - 0.5 * x[2] + std::normal_distribution<double>(0, 0.8)(rng) > 0 ? 1 : 0;
    });
    const auto plan = expanding_splits(m.rows(), 5);
    for (const auto kind : {backtest::ModelSpec::Kind::logistic, backtest::ModelSpec::Kind::gbt}) {
        backtest::ModelSpec spec;
        spec.kind = kind;
        spec.gbt_grid.max_depth = {2, 3};
        spec.gbt_grid.max_rounds = 120;
        for (std::size_t f = 0; f < plan.size(); ++f) {
            const auto base = backtest::fit_fold(m, plan[f], spec).to_json().dump();
            auto future = m;
            std::mt19937_64 rng(f);
            for (std::size_t r = plan[f].train.end; r < m.rows(); ++r) {
                future.labels[r] ^= 1;
                future.next_returns[r] = -future.next_returns[r];
                for (std::size_t c = 0; c < m.cols(); ++c) future.at(r, c) = std::normal_distribution<double>(3, 2)(rng);
            }
            o.require(backtest::fit_fold(future, plan[f], spec).to_json().dump() == base,
                      std::string(backtest::to_string(kind)) + " fold " + std::to_string(f + 1) + " model changed");
        }
    }
    return o;
}

Outcome no_lookahead_positions() {
    Outcome o;
    const auto m = testsupport::planted_matrix(360, 4, 32, [](auto x, auto& rng) {
        return x[1] + std::normal_distribution<double>(0, 0.8)(rng) > 0 ? 1 : 0;
    });
    backtest::ModelSpec spec;
    spec.gbt_grid.max_depth = {2};
    spec.gbt_grid.max_rounds = 100;
    backtest::BacktestConfig cfg;
    cfg.bootstrap_n = 50;
    const auto base = backtest::run_backtest(m, spec, cfg);
    const auto plan = expanding_splits(m.rows(), 5);
    const std::size_t cut = plan.back().test.begin + 20;
    auto future = m;
    for (std::size_t r = cut; r < m.rows(); ++r) {
        future.labels[r] ^= 1;
        future.next_returns[r] *= -3;
        for (std::size_t c = 0; c < m.cols(); ++c) future.at(r, c) = -future.at(r, c) + 1.0;
    }
    const auto pert = backtest::run_backtest(future, spec, cfg);
    std::size_t compared = 0;
    for (std::size_t i = 0; i < base.records.size() && base.records[i].date < m.dates[cut]; ++i, ++compared) {
        const auto& a = base.records[i];
        const auto& b = pert.records[i];
        o.require(a.date == b.date && a.position == b.position && a.proba == b.proba && a.net_return == b.net_return &&
                      a.trade == b.trade,
                  "record on " + a.date.iso() + " changed");
    }
    o.require(compared == cut - plan.front().test.begin, "unexpected record count");
    if (o.pass) o.detail = std::to_string(compared) + " earlier records unchanged";
    return o;
}

// --- planted and null backtests ---------------------------------------------

Outcome planted_signal() {
    Outcome o;
    const auto t0 = Clock::now();
    backtest::BacktestConfig cfg;
    cfg.seed = 11;
    const auto single = testsupport::planted_matrix(2000, 5, 41, [](auto x, auto&) { return x[0] > 0 ? 1 : 0; });
    backtest::ModelSpec gbt;
    const auto g = backtest::run_backtest(single, gbt, cfg);
    const auto linear = testsupport::planted_matrix(
        2000, 5, 42, [](auto x, auto&) { return 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[3] > 0 ? 1 : 0; });
    backtest::ModelSpec lr;
    lr.kind = backtest::ModelSpec::Kind::logistic;
    const auto l = backtest::run_backtest(linear, lr, cfg);
    const double secs = seconds_since(t0);
    const double sharpe = g.metrics.sharpe.value_or(0.0);
    o.require(g.accuracy > 0.95, "GBT accuracy " + format_fixed(g.accuracy, 4));
    o.require(sharpe > 3, "GBT Sharpe " + format_fixed(sharpe, 3));
    o.require(l.accuracy > 0.9, "logistic accuracy " + format_fixed(l.accuracy, 4));
    o.require(secs < 300, "took " + format_fixed(secs, 1) + " s");
    if (o.pass)
        o.detail = "GBT acc " + format_fixed(g.accuracy, 4) + " Sharpe " + format_fixed(sharpe, 2) + ", logistic acc " +
                   format_fixed(l.accuracy, 4) + ", " + format_fixed(secs, 1) + " s";
    return o;
}

Outcome null_backtest() {
    Outcome o;
    int contains = 0;
    backtest::ModelSpec spec;
    spec.kind = backtest::ModelSpec::Kind::logistic;
    for (int rep = 0; rep < 100; ++rep) {
        const auto m = testsupport::planted_matrix(500, 5, 1000 + rep, [](auto, auto& rng) {
            return std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
        });
        backtest::BacktestConfig cfg;
        cfg.cost_rate = 0.0;
        cfg.seed = 5000 + rep;
        const auto r = backtest::run_backtest(m, spec, cfg);
        if (r.sharpe_ci.contains(0.0)) ++contains;
    }
    o.require(contains >= 90, std::to_string(contains) + "/100 intervals contain 0");
    if (o.pass) o.detail = std::to_string(contains) + "/100 intervals contain 0";
    return o;
}

// --- model numerics ----------------------------------------------------------

Outcome logistic_gradient() {
    Outcome o;
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = 150, d = 6;
    std::vector<double> x(n * d);
    for (auto& v : x) v = normal(rng);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i * d] - x[i * d + 1] + normal(rng) > 0;
    const models::DenseView view(x, n, d);
    const double C = 0.7, h = 1e-5;
    double worst = 0;
    for (int point = 0; point < 20; ++point) {
        std::vector<double> w(d);
        for (auto& v : w) v = normal(rng);
        const double b = normal(rng);
        const auto obj = models::logistic_objective(view, y, w, b, C);
        std::vector<double> analytic = obj.grad_w, numeric(d + 1);
        analytic.push_back(obj.grad_b);
        for (std::size_t j = 0; j <= d; ++j) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (j < d) {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            numeric[j] = (models::logistic_objective(view, y, wp, bp, C).value -
                          models::logistic_objective(view, y, wm, bm, C).value) /
                         (2 * h);
        }
        double diff = 0, norm = 0;
        for (std::size_t j = 0; j <= d; ++j) {
            diff += (analytic[j] - numeric[j]) * (analytic[j] - numeric[j]);
            norm += analytic[j] * analytic[j];
        }
        worst = std::max(worst, std::sqrt(diff) / std::sqrt(norm));
    }
    models::LogisticFitInfo info;
    models::fit_logistic(view, y, C, &info);
    o.require(worst <= 1e-6, "relative error " + format_double(worst));
    o.require(info.grad_norm <= 1e-8, "converged gradient norm " + format_double(info.grad_norm));
    if (o.pass) o.detail = "rel err " + format_double(worst) + ", grad norm " + format_double(info.grad_norm);
    return o;
}

Outcome gbt_monotone_loss() {
    Outcome o;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int fixture = 0; fixture < 3; ++fixture) {
        std::mt19937_64 rng(500 + fixture);
        const std::size_t n = 300, d = 3 + fixture;
        std::vector<double> x(n * d);
        for (auto& v : x) v = normal(rng);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = fixture == 0   ? x[i * d]
                             : fixture == 1 ? x[i * d] * x[i * d + 1]
                                            : std::sin(2 * x[i * d + 2]) + 0.3 * x[i * d];
            y[i] = s + 0.5 * normal(rng) > 0;
        }
        models::GbtParams p;
        p.max_depth = 3;
        p.learning_rate = 0.1;
        p.gamma = 0.0;
        p.n_rounds = 200;
        models::BoostHistory hist;
        const models::DenseView view(x, n, d);
        models::boost(view, y, p, std::nullopt, 0, &hist);
        const std::vector<double> base_margin(n, models::prevalence_log_odds(y));
        double prev = models::logloss_from_margin(y, base_margin);
        o.require(hist.train_loss.size() == 200, "fixture " + std::to_string(fixture) + ": round count");
        for (std::size_t r = 0; r < hist.train_loss.size(); ++r) {
            o.require(hist.train_loss[r] <= prev, "fixture " + std::to_string(fixture) + ": loss rose at round " +
                                                      std::to_string(r + 1));
            prev = hist.train_loss[r];
        }
    }
    return o;
}

Outcome sentiment_aggregation() {
    Outcome o;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1), g(-10, 10);
    double worst = 0;
    for (int day = 0; day < 1000; ++day) {
        const int n = 1 + static_cast<int>(rng() % 50);
        std::vector<sentiment::ScoredHeadline> hs;
        double mean_sq = 0;
        for (int i = 0; i < n; ++i) {
            sentiment::ScoredHeadline h;
            h.date = Date(2020, 1, 1);
            const double s = u(rng);
            h.probs = {(1 - s) / 2, 0.0, (1 + s) / 2};
            h.polarity = s;
            h.goldstein_scale = g(rng);
            mean_sq += s * s;
            hs.push_back(h);
        }
        mean_sq /= n;
        const auto d = sentiment::aggregate_daily(hs).at(0);
        worst = std::max(worst, std::abs(d.sentiment_std * d.sentiment_std + d.mean_sentiment * d.mean_sentiment - mean_sq));
    }
    sentiment::ScoredHeadline one;
    one.date = Date(2020, 1, 1);
    one.probs = {0.2, 0.0, 0.8};
    one.polarity = 0.6;
    const double ai = sentiment::aggregate_daily({one}).at(0).article_impact;
    o.require(worst <= 1e-9, "identity gap " + format_double(worst));
    o.require(format_fixed(ai, 5) == "0.41589", "single-headline impact " + format_double(ai));
    if (o.pass) o.detail = "identity gap " + format_double(worst) + ", impact " + format_fixed(ai, 5);
    return o;
}

Outcome determinism() {
    Outcome o;
    const auto tmp = fs::temp_directory_path() / "macrosent_accept_determinism";
    fs::remove_all(tmp);
    const auto c = fixture_config(tmp / "out");
    const auto run = [&] {
        std::ostringstream log;
        pipeline::cmd_ingest(c, log);
        pipeline::cmd_score(c, log);
        pipeline::cmd_features(c, log);
        pipeline::cmd_backtest(c, log);
        pipeline::cmd_explain(c, log);
        pipeline::cmd_report(c, log);
    };
    const auto contents = [](const fs::path& root) {
        std::map<std::string, std::string> out;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testsupport::slurp(e.path());
        return out;
    };
    run();
    fs::rename(tmp / "out", tmp / "first");
    run();
    const auto a = contents(tmp / "first");
    const auto b = contents(tmp / "out");
    o.require(a.size() > 10, "only " + std::to_string(a.size()) + " files written");
    o.require(a == b, "reports differ between runs");
    if (o.pass) o.detail = std::to_string(a.size()) + " files identical";
    fs::remove_all(tmp);
    return o;
}

}  // namespace

int main() {
    int failed = 0;
    const auto report = [&](const std::string& name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << (o.detail.empty() ? "" : " (" + o.detail + ")") << std::endl;
    };
    report("treeshap-oracle-equivalence", shap_oracle);
    report("cost-identity", cost_identity);
    report("split-arithmetic", split_arithmetic);
    std::optional<FixtureInputs> inputs;
    report("no-lookahead-features", [&] {
        inputs = fixture_inputs();
        return no_lookahead_features(*inputs);
    });
    report("no-lookahead-fold-models", no_lookahead_models);
    report("no-lookahead-positions", no_lookahead_positions);
    report("planted-signal-backtest", planted_signal);
    report("null-backtest-coverage", null_backtest);
    report("logistic-gradient", logistic_gradient);
    report("gbt-monotone-loss", gbt_monotone_loss);
    report("sentiment-aggregation", sentiment_aggregation);
    report("pipeline-determinism", determinism);
    return failed ? 1 : 0;
}
