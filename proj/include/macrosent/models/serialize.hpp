#pragma once

#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "macrosent/features.hpp"
#include "macrosent/models/gbt.hpp"
#include "macrosent/models/logistic.hpp"

namespace macrosent::models {

inline constexpr int kModelSchemaVersion = 1;

namespace detail_json {

using json = nlohmann::ordered_json;

inline json node_to_json(const Tree& t, int i) {
    const auto& n = t.nodes[i];
    json j;
    if (n.is_leaf()) {
        j["leaf"] = n.value;
        j["cover"] = n.cover;
        return j;
    }
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["value"] = n.value;
    j["cover"] = n.cover;
    j["left"] = node_to_json(t, n.left);
    j["right"] = node_to_json(t, n.right);
    return j;
}

inline int node_from_json(const json& j, Tree& t, std::size_t n_features) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (j.contains("leaf")) {
        t.nodes[id].value = j.at("leaf").get<double>();
        t.nodes[id].cover = j.at("cover").get<double>();
        return id;
    }
    const int f = j.at("feature").get<int>();
    if (f < 0 || static_cast<std::size_t>(f) >= n_features) throw DataError("model: split feature out of range");
    t.nodes[id].feature = f;
    t.nodes[id].threshold = j.at("threshold").get<double>();
    t.nodes[id].value = j.value("value", 0.0);
    t.nodes[id].cover = j.at("cover").get<double>();
    const int l = node_from_json(j.at("left"), t, n_features);
    const int r = node_from_json(j.at("right"), t, n_features);
    t.nodes[id].left = l;
    t.nodes[id].right = r;
    return id;
}

inline void check_header(const json& j, const char* type) {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
        throw DataError("model: unsupported schema_version " + j.at("schema_version").dump());
    if (j.at("type").get<std::string>() != type) throw DataError(std::string("model: expected type ") + type);
}

}  // namespace detail_json

inline nlohmann::ordered_json to_json(const GbtModel& m) {
    detail_json::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["type"] = "gbt";
    j["n_features"] = m.n_features;
    j["base_score"] = m.base_score;
    j["learning_rate"] = m.learning_rate;
    j["params"] = {{"max_depth", m.params.max_depth},         {"learning_rate", m.params.learning_rate},
                   {"lambda", m.params.lambda},               {"alpha", m.params.alpha},
                   {"min_child_weight", m.params.min_child_weight}, {"gamma", m.params.gamma},
                   {"n_rounds", m.params.n_rounds}};
    j["trees"] = detail_json::json::array();
    for (const auto& t : m.trees) j["trees"].push_back(detail_json::node_to_json(t, 0));
    return j;
}

inline GbtModel gbt_from_json(const nlohmann::ordered_json& j) {
    detail_json::check_header(j, "gbt");
    GbtModel m;
    m.n_features = j.at("n_features").get<std::size_t>();
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    const auto& p = j.at("params");
    m.params = {p.at("max_depth").get<int>(),        p.at("learning_rate").get<double>(), p.at("lambda").get<double>(),
                p.at("alpha").get<double>(),         p.at("min_child_weight").get<double>(),
                p.at("gamma").get<double>(),         p.at("n_rounds").get<int>()};
    for (const auto& tj : j.at("trees")) {
        Tree t;
        detail_json::node_from_json(tj, t, m.n_features);
        m.trees.push_back(std::move(t));
    }
    return m;
}

inline nlohmann::ordered_json to_json(const LogisticModel& m, const features::Scaler* scaler = nullptr) {
    detail_json::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["type"] = "logistic";
    j["n_features"] = m.weights.size();
    j["C"] = m.C;
    j["intercept"] = m.intercept;
    j["weights"] = m.weights;
    if (scaler) {
        j["scaler"] = {{"mean", scaler->mean}, {"std", scaler->std}, {"constant", scaler->constant}};
    }
    return j;
}

inline LogisticModel logistic_from_json(const nlohmann::ordered_json& j, std::optional<features::Scaler>* scaler = nullptr) {
    detail_json::check_header(j, "logistic");
    LogisticModel m;
    m.C = j.at("C").get<double>();
    m.intercept = j.at("intercept").get<double>();
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.weights.size() != j.at("n_features").get<std::size_t>()) throw DataError("model: weight count mismatch");
    if (scaler) {
        scaler->reset();
        if (j.contains("scaler")) {
            const auto& s = j.at("scaler");
            *scaler = features::Scaler{s.at("mean").get<std::vector<double>>(), s.at("std").get<std::vector<double>>(),
                                       s.at("constant").get<std::vector<bool>>()};
        }
    }
    return m;
}

}  // namespace macrosent::models
