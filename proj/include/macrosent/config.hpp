#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "macrosent/backtest.hpp"
#include "macrosent/core.hpp"

namespace macrosent {

// Every setting of a pipeline run. Paths may be empty when the stage that
// needs them is not run.
struct RunConfig {
    std::string events;
    std::string headline_store;
    std::string scores;  // externally produced score file; replaces the lexicon scorer
    std::string prices;
    std::string out = "out";
    std::string asset = "asset";
    std::string lexicon;
    std::size_t top_k = 100;
    unsigned fetch_workers = 4;
    bool weekend_pooling = true;
    std::size_t warm_up = 20;
    double cost_rate = 0.0002;
    std::size_t k_splits = 5;
    std::string model = "both";  // gbt | logistic | both
    std::vector<double> logistic_c_grid{0.01, 0.1, 1.0, 10.0};
    std::vector<int> gbt_max_depth{2, 3, 4};
    std::vector<double> gbt_learning_rate{0.05, 0.1};
    std::vector<double> gbt_lambda{1.0};
    std::vector<double> gbt_alpha{0.0};
    double gbt_min_child_weight = 1.0;
    int gbt_max_rounds = 500;
    int gbt_early_stop = 50;
    std::size_t inner_splits = 5;
    std::size_t bootstrap_n = 1000;
    std::size_t bootstrap_block = 20;
    double bootstrap_level = 0.95;
    std::optional<std::uint64_t> seed;

    std::vector<backtest::ModelSpec::Kind> model_kinds() const {
        if (model == "gbt") return {backtest::ModelSpec::Kind::gbt};
        if (model == "logistic") return {backtest::ModelSpec::Kind::logistic};
        return {backtest::ModelSpec::Kind::logistic, backtest::ModelSpec::Kind::gbt};
    }

    backtest::ModelSpec model_spec(backtest::ModelSpec::Kind kind) const {
        backtest::ModelSpec spec;
        spec.kind = kind;
        spec.C_grid = logistic_c_grid;
        spec.gbt_grid.max_depth = gbt_max_depth;
        spec.gbt_grid.learning_rate = gbt_learning_rate;
        spec.gbt_grid.lambda = gbt_lambda;
        spec.gbt_grid.alpha = gbt_alpha;
        spec.gbt_grid.min_child_weight = gbt_min_child_weight;
        spec.gbt_grid.max_rounds = gbt_max_rounds;
        spec.early_stop_rounds = gbt_early_stop;
        spec.inner_splits = inner_splits;
        return spec;
    }

    backtest::BacktestConfig backtest_config() const {
        return {cost_rate, k_splits, bootstrap_n, bootstrap_block, bootstrap_level, seed.value_or(0)};
    }
};

namespace detail_cfg {

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_floating_point_v<T>) {
            s += format_double(v[i]);
        } else {
            s += std::to_string(v[i]);
        }
    }
    return s;
}

template <class T>
T parse_scalar(const std::string& key, const std::string& value) {
    if constexpr (std::is_same_v<T, bool>) {
        if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
        if (value == "false" || value == "0" || value == "no" || value == "off") return false;
        throw UsageError("config: " + key + " expects true/false, got '" + value + "'");
    } else {
        const auto v = detail::parse_number<T>(value);
        if (!v) throw UsageError("config: " + key + " expects a number, got '" + value + "'");
        return *v;
    }
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = std::string(detail::trim(item));
        if (!t.empty()) out.push_back(parse_scalar<T>(key, t));
    }
    if (out.empty()) throw UsageError("config: " + key + " must list at least one value");
    return out;
}

}  // namespace detail_cfg

// Ordered key/value view of a config, as written to `resolved-config.txt`.
inline std::map<std::string, std::string> to_map(const RunConfig& c) {
    using detail_cfg::join;
    std::map<std::string, std::string> m{
        {"events", c.events},
        {"headline_store", c.headline_store},
        {"scores", c.scores},
        {"prices", c.prices},
        {"out", c.out},
        {"asset", c.asset},
        {"lexicon", c.lexicon},
        {"top_k", std::to_string(c.top_k)},
        {"fetch_workers", std::to_string(c.fetch_workers)},
        {"weekend_pooling", c.weekend_pooling ? "true" : "false"},
        {"warm_up", std::to_string(c.warm_up)},
        {"cost_rate", format_double(c.cost_rate)},
        {"k_splits", std::to_string(c.k_splits)},
        {"model", c.model},
        {"logistic_c_grid", join(c.logistic_c_grid)},
        {"gbt_max_depth", join(c.gbt_max_depth)},
        {"gbt_learning_rate", join(c.gbt_learning_rate)},
        {"gbt_lambda", join(c.gbt_lambda)},
        {"gbt_alpha", join(c.gbt_alpha)},
        {"gbt_min_child_weight", format_double(c.gbt_min_child_weight)},
        {"gbt_max_rounds", std::to_string(c.gbt_max_rounds)},
        {"gbt_early_stop", std::to_string(c.gbt_early_stop)},
        {"inner_splits", std::to_string(c.inner_splits)},
        {"bootstrap_n", std::to_string(c.bootstrap_n)},
        {"bootstrap_block", std::to_string(c.bootstrap_block)},
        {"bootstrap_level", format_double(c.bootstrap_level)},
    };
    if (c.seed) m["seed"] = std::to_string(*c.seed);
    return m;
}

inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        RunConfig c;
        c.seed = 0;
        std::vector<std::string> k;
        for (const auto& [key, _] : to_map(c)) k.push_back(key);
        return k;
    }();
    return keys;
}

// Applies one setting; unknown keys are usage errors.
inline void set_value(RunConfig& c, const std::string& key, const std::string& raw) {
    using namespace detail_cfg;
    const std::string value(detail::trim(raw));
    if (key == "events") c.events = value;
    else if (key == "headline_store") c.headline_store = value;
    else if (key == "scores") c.scores = value;
    else if (key == "prices") c.prices = value;
    else if (key == "out") c.out = value;
    else if (key == "asset") c.asset = value;
    else if (key == "lexicon") c.lexicon = value;
    else if (key == "top_k") c.top_k = parse_scalar<std::size_t>(key, value);
    else if (key == "fetch_workers") c.fetch_workers = parse_scalar<unsigned>(key, value);
    else if (key == "weekend_pooling") c.weekend_pooling = parse_scalar<bool>(key, value);
    else if (key == "warm_up") c.warm_up = parse_scalar<std::size_t>(key, value);
    else if (key == "cost_rate") c.cost_rate = parse_scalar<double>(key, value);
    else if (key == "k_splits") c.k_splits = parse_scalar<std::size_t>(key, value);
    else if (key == "model") c.model = value;
    else if (key == "logistic_c_grid") c.logistic_c_grid = parse_list<double>(key, value);
    else if (key == "gbt_max_depth") c.gbt_max_depth = parse_list<int>(key, value);
    else if (key == "gbt_learning_rate") c.gbt_learning_rate = parse_list<double>(key, value);
    else if (key == "gbt_lambda") c.gbt_lambda = parse_list<double>(key, value);
    else if (key == "gbt_alpha") c.gbt_alpha = parse_list<double>(key, value);
    else if (key == "gbt_min_child_weight") c.gbt_min_child_weight = parse_scalar<double>(key, value);
    else if (key == "gbt_max_rounds") c.gbt_max_rounds = parse_scalar<int>(key, value);
    else if (key == "gbt_early_stop") c.gbt_early_stop = parse_scalar<int>(key, value);
    else if (key == "inner_splits") c.inner_splits = parse_scalar<std::size_t>(key, value);
    else if (key == "bootstrap_n") c.bootstrap_n = parse_scalar<std::size_t>(key, value);
    else if (key == "bootstrap_block") c.bootstrap_block = parse_scalar<std::size_t>(key, value);
    else if (key == "bootstrap_level") c.bootstrap_level = parse_scalar<double>(key, value);
    else if (key == "seed") c.seed = parse_scalar<std::uint64_t>(key, value);
    else throw UsageError("config: unknown key '" + key + "'");
}

// Flat `key = value` lines; '#' starts a comment.
inline void apply_config_text(RunConfig& c, std::istream& in, const std::string& name = "<config>") {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw UsageError(name + ":" + std::to_string(n) + ": expected key = value");
        set_value(c, std::string(detail::trim(body.substr(0, eq))), std::string(body.substr(eq + 1)));
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    RunConfig c;
    apply_config_text(c, in, path);
    return c;
}

inline void validate(const RunConfig& c) {
    if (!(c.cost_rate >= 0)) throw UsageError("config: cost_rate must be >= 0");
    if (c.k_splits < 2) throw UsageError("config: k_splits must be >= 2");
    if (c.inner_splits < 2) throw UsageError("config: inner_splits must be >= 2");
    if (!c.seed) throw UsageError("config: a seed is required (set `seed` or pass --seed)");
    if (c.model != "gbt" && c.model != "logistic" && c.model != "both")
        throw UsageError("config: model must be gbt, logistic or both");
    if (c.top_k < 1) throw UsageError("config: top_k must be >= 1");
    if (c.asset.empty() || c.asset.find_first_of("/\\") != std::string::npos)
        throw UsageError("config: asset must be a plain name");
    for (double C : c.logistic_c_grid)
        if (!(C > 0)) throw UsageError("config: logistic_c_grid values must be positive");
    for (double eta : c.gbt_learning_rate)
        if (!(eta > 0 && eta <= 1)) throw UsageError("config: gbt_learning_rate values must be in (0, 1]");
    for (int d : c.gbt_max_depth)
        if (d < 1) throw UsageError("config: gbt_max_depth values must be >= 1");
    if (c.gbt_max_rounds < 1) throw UsageError("config: gbt_max_rounds must be >= 1");
}

inline void write_config(std::ostream& out, const RunConfig& c) {
    for (const auto& [k, v] : to_map(c)) out << k << " = " << v << "\n";
}

}  // namespace macrosent
