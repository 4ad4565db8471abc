#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "macrosent/backtest.hpp"
#include "macrosent/config.hpp"
#include "macrosent/explain.hpp"
#include "macrosent/features.hpp"
#include "macrosent/ingest.hpp"
#include "macrosent/market.hpp"
#include "macrosent/sentiment.hpp"

// Batch stages. Each reads its inputs from the config or from the asset's
// output directory and writes its artifacts under `<out>/<asset>/`.
namespace macrosent::pipeline {

namespace fs = std::filesystem;

inline fs::path asset_dir(const RunConfig& c) { return fs::path(c.out) / c.asset; }

namespace artifact {
inline constexpr const char* headlines = "headlines.csv";
inline constexpr const char* scores = "scores.jsonl";
inline constexpr const char* daily = "daily_sentiment.csv";
inline constexpr const char* features = "features.csv";
inline constexpr const char* resolved_config = "resolved-config.txt";
inline constexpr const char* summary = "summary.csv";
}  // namespace artifact

inline std::string metrics_file(const std::string& model) { return "metrics_" + model + ".csv"; }
inline std::string model_file(const std::string& model, std::size_t fold) {
    return "models/" + model + "_fold" + std::to_string(fold) + ".json";
}

namespace detail_pipe {

// Writes through a temporary file so a failed stage never leaves a partial artifact.
inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        body(out);
        out.flush();
        if (!out) throw DataError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

inline fs::path require_artifact(const fs::path& path, const char* stage) {
    if (!fs::exists(path))
        throw DataError("missing " + path.string() + ": run " + std::string(stage) + " first");
    return path;
}

inline const std::string& require_input(const std::string& value, const char* key) {
    if (value.empty()) throw UsageError(std::string("no ") + key + " given (set `" + key + "` in the config)");
    return value;
}

inline void write_resolved_config(const RunConfig& c) {
    write_file(asset_dir(c) / artifact::resolved_config, [&](std::ostream& o) { write_config(o, c); });
}

}  // namespace detail_pipe

inline void cmd_ingest(const RunConfig& c, std::ostream& log) {
    const auto& events_path = detail_pipe::require_input(c.events, "events");
    const auto& store_path = detail_pipe::require_input(c.headline_store, "headline_store");
    const auto parsed = ingest::parse_events(events_path);
    const auto macro = ingest::filter_macro_events(parsed.events);
    const auto top = ingest::select_top_daily(macro, c.top_k);
    const auto store = ingest::HeadlineStore::open(store_path);
    const auto resolved = ingest::resolve_headlines(top, store, c.fetch_workers);
    detail_pipe::write_file(asset_dir(c) / artifact::headlines,
                            [&](std::ostream& o) { ingest::write_headlines(o, resolved.headlines); });
    detail_pipe::write_resolved_config(c);
    log << "ingest: " << parsed.events.size() << " events (" << parsed.skipped << " skipped), " << macro.size()
        << " macro, " << top.size() << " kept, " << resolved.headlines.size() << " headlines, " << resolved.dropped
        << " without text\n";
}

// Lexicon scoring of the ingested headlines, or validation of an external
// score file when `scores` is set.
inline void cmd_score(const RunConfig& c, std::ostream& log) {
    const auto target = asset_dir(c) / artifact::scores;
    if (!c.scores.empty()) {
        const auto loaded = sentiment::load_headline_scores(c.scores);
        detail_pipe::write_file(target, [&](std::ostream& o) {
            for (const auto& h : loaded.headlines) sentiment::write_score_line(o, h.date, h.headline, h.probs, h.goldstein_scale);
        });
        log << "score: " << loaded.headlines.size() << " external scores, " << loaded.rejected_lines.size()
            << " lines rejected\n";
    } else {
        const auto src = detail_pipe::require_artifact(asset_dir(c) / artifact::headlines, "ingest");
        const auto lexicon = sentiment::Lexicon::load(detail_pipe::require_input(c.lexicon, "lexicon"));
        const auto headlines = ingest::read_headlines(src.string());
        detail_pipe::write_file(target, [&](std::ostream& o) {
            for (const auto& h : headlines)
                sentiment::write_score_line(o, h.date, h.headline, sentiment::lexicon_score(h.headline, lexicon),
                                            h.goldstein_scale);
        });
        log << "score: " << headlines.size() << " headlines scored with lexicon (" << lexicon.size() << " words)\n";
    }
    detail_pipe::write_resolved_config(c);
}

inline features::FeatureMatrix build_features(const std::vector<sentiment::ScoredHeadline>& scored,
                                              const std::vector<market::PriceBar>& prices, const RunConfig& c,
                                              std::vector<sentiment::DailySentiment>* daily_out = nullptr,
                                              features::BuildStats* stats = nullptr) {
    auto daily = sentiment::aggregate_daily(scored);
    std::vector<Date> calendar;
    calendar.reserve(prices.size());
    for (const auto& p : prices) calendar.push_back(p.date);
    const auto merged = features::merge_calendar(
        daily, calendar, c.weekend_pooling ? features::NonTradingNews::pool_into_next : features::NonTradingNews::drop);
    const auto aligned = features::align(merged, prices);
    if (daily_out) *daily_out = std::move(daily);
    return features::build_feature_matrix(aligned, c.warm_up, stats);
}

inline void cmd_features(const RunConfig& c, std::ostream& log) {
    const auto src = detail_pipe::require_artifact(asset_dir(c) / artifact::scores, "score");
    const auto scored = sentiment::load_headline_scores(src.string());
    const auto prices = market::load_prices(detail_pipe::require_input(c.prices, "prices"));
    std::vector<sentiment::DailySentiment> daily;
    features::BuildStats stats;
    const auto matrix = build_features(scored.headlines, prices, c, &daily, &stats);
    detail_pipe::write_file(asset_dir(c) / artifact::daily, [&](std::ostream& o) { sentiment::write_daily(o, daily); });
    detail_pipe::write_file(asset_dir(c) / artifact::features,
                            [&](std::ostream& o) { features::write_matrix(o, matrix); });
    detail_pipe::write_resolved_config(c);
    log << "features: " << daily.size() << " news days, " << stats.aligned << " aligned days, " << matrix.rows()
        << " rows (" << stats.warm_up << " warm-up, " << stats.invalid << " dropped)\n";
}

inline features::FeatureMatrix load_features(const RunConfig& c) {
    const auto path = detail_pipe::require_artifact(asset_dir(c) / artifact::features, "features");
    std::ifstream in(path);
    return features::read_matrix(in, path.string());
}

inline void write_report(const fs::path& dir, const backtest::BacktestReport& r) {
    const std::string m = backtest::to_string(r.model);
    detail_pipe::write_file(dir / metrics_file(m), [&](std::ostream& o) { backtest::write_metrics(o, r); });
    detail_pipe::write_file(dir / ("daily_" + m + ".csv"),
                            [&](std::ostream& o) { backtest::write_daily_records(o, r.records); });
    detail_pipe::write_file(dir / ("bootstrap_" + m + ".csv"), [&](std::ostream& o) { backtest::write_bootstrap(o, r); });
    detail_pipe::write_file(dir / ("classification_" + m + ".csv"),
                            [&](std::ostream& o) { backtest::write_classification(o, r); });
    for (const auto& f : r.folds)
        detail_pipe::write_file(dir / model_file(m, f.index),
                                [&](std::ostream& o) { o << f.model.to_json().dump(2) << "\n"; });
}

inline void cmd_backtest(const RunConfig& c, std::ostream& log) {
    const auto matrix = load_features(c);
    for (const auto kind : c.model_kinds()) {
        const auto report = backtest::run_backtest(matrix, c.model_spec(kind), c.backtest_config());
        write_report(asset_dir(c), report);
        log << "backtest " << backtest::to_string(kind) << ": " << report.folds.size() << " folds, "
            << report.records.size() << " OOS days, accuracy " << format_fixed(report.accuracy, 4) << ", Sharpe "
            << (report.metrics.sharpe ? format_fixed(*report.metrics.sharpe, 3) : "NA") << "\n";
    }
    detail_pipe::write_resolved_config(c);
}

// Attributions for the test rows of the last fold, using that fold's model.
inline void cmd_explain(const RunConfig& c, std::ostream& log) {
    const auto matrix = load_features(c);
    const auto plan = expanding_splits(matrix.rows(), c.k_splits);
    const auto& fold = plan.back();
    const auto test = matrix.slice(fold.test.begin, fold.test.end);
    for (const auto kind : c.model_kinds()) {
        const std::string m = backtest::to_string(kind);
        const auto path = detail_pipe::require_artifact(asset_dir(c) / model_file(m, plan.size()), "backtest");
        std::ifstream in(path);
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
        const auto fitted = backtest::FittedModel::from_json(j);
        explain::ShapMatrix shap;
        if (const auto* gbt = std::get_if<models::GbtModel>(&fitted.model)) {
            if (gbt->n_features != test.cols()) throw DataError(path.string() + ": feature count does not match features.csv");
            shap = explain::tree_shap(*gbt, models::DenseView(test));
        } else {
            const auto z = fitted.scaler ? features::apply_scaler(*fitted.scaler, test) : test;
            shap = explain::linear_contributions(std::get<models::LogisticModel>(fitted.model), models::DenseView(z));
        }
        shap.dates = test.dates;
        shap.feature_names = test.names;
        const auto ranking = explain::shap_global_ranking(shap);
        const auto dir = asset_dir(c);
        detail_pipe::write_file(dir / ("shap_" + m + ".csv"), [&](std::ostream& o) { explain::write_shap(o, shap); });
        detail_pipe::write_file(dir / ("shap_" + m + "_base.csv"),
                                [&](std::ostream& o) { explain::write_base_value(o, shap); });
        detail_pipe::write_file(dir / ("shap_" + m + "_ranking.csv"),
                                [&](std::ostream& o) { explain::write_ranking(o, ranking); });
        log << "explain " << m << ": " << shap.rows << " rows, top feature " << ranking.front().feature << "\n";
    }
    detail_pipe::write_resolved_config(c);
}

// Collects the aggregate row of every `<out>/<asset>/metrics_<model>.csv`
// into one table, sorted by asset then model.
inline void cmd_report(const RunConfig& c, std::ostream& log) {
    const fs::path root(c.out);
    if (!fs::is_directory(root)) throw DataError("missing " + root.string() + ": run backtest first");
    std::map<std::pair<std::string, std::string>, csv::Row> rows;
    for (const auto& asset : fs::directory_iterator(root)) {
        if (!asset.is_directory()) continue;
        for (const char* m : {"logistic", "gbt"}) {
            const auto path = asset.path() / metrics_file(m);
            if (!fs::exists(path)) continue;
            auto in = csv::open_input(path.string());
            csv::Reader reader(in);
            csv::Row row, last;
            if (!reader.next(row)) throw DataError(path.string() + ": empty metrics file");
            while (reader.next(row))
                if (!row.empty() && row[0] == "aggregate") last = row;
            if (last.size() != backtest::metrics_columns().size() + 1)
                throw DataError(path.string() + ": no aggregate row");
            last.erase(last.begin());
            rows[{asset.path().filename().string(), m}] = last;
        }
    }
    if (rows.empty()) throw DataError("no metrics under " + root.string() + ": run backtest first");
    detail_pipe::write_file(root / artifact::summary, [&](std::ostream& o) {
        csv::Row header{"asset", "model"};
        header.insert(header.end(), backtest::metrics_columns().begin(), backtest::metrics_columns().end());
        csv::write_row(o, header);
        for (const auto& [key, cells] : rows) {
            csv::Row row{key.first, key.second};
            row.insert(row.end(), cells.begin(), cells.end());
            csv::write_row(o, row);
        }
    });
    log << "report: " << rows.size() << " rows -> " << (root / artifact::summary).string() << "\n";
}

}  // namespace macrosent::pipeline
