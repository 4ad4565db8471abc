#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "macrosent/core.hpp"
#include "macrosent/csv.hpp"

namespace macrosent::sentiment {

inline constexpr double kProbSumTolerance = 1e-6;

struct ClassProbs {
    double p_neg = 0.0;
    double p_neu = 0.0;
    double p_pos = 0.0;

    bool valid() const {
        const auto in01 = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
        return in01(p_neg) && in01(p_neu) && in01(p_pos) &&
               std::abs(p_neg + p_neu + p_pos - 1.0) <= kProbSumTolerance;
    }
};

struct ScoredHeadline {
    Date date;
    double polarity = 0.0;
    double goldstein_scale = 0.0;
    ClassProbs probs;
    std::string headline;
};

// Per-day aggregates. `volume == 0` marks a trading day without news; its
// other fields are zero and carry no information.
struct DailySentiment {
    Date date;
    double mean_sentiment = 0.0;
    double sentiment_std = 0.0;
    long long volume = 0;
    double log_volume = 0.0;
    double article_impact = 0.0;
    double goldstein_mean = 0.0;
    double goldstein_std = 0.0;

    bool valid() const { return volume > 0; }
};

// Net bullishness p_pos - p_neg.
inline double polarity(const ClassProbs& probs) {
    if (!probs.valid())
        throw DataError("class probabilities (" + format_double(probs.p_neg) + ", " + format_double(probs.p_neu) +
                        ", " + format_double(probs.p_pos) + ") are not a distribution");
    return std::clamp(probs.p_pos - probs.p_neg, -1.0, 1.0);
}

// Signed word list for the deterministic fallback scorer.
class Lexicon {
public:
    // Format: one `word,+1` or `word,-1` per line; '#' starts a comment.
    static Lexicon load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open lexicon '" + path + "'");
        Lexicon lex;
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto body = detail::trim(line);
            if (body.empty()) continue;
            const auto comma = body.find(',');
            const auto sign = comma == std::string_view::npos ? std::nullopt : detail::parse_number<int>(body.substr(comma + 1));
            if (!sign || (*sign != 1 && *sign != -1))
                throw DataError(path + ":" + std::to_string(n) + ": expected `word,+1` or `word,-1`");
            lex.add(std::string(detail::trim(body.substr(0, comma))), *sign);
        }
        return lex;
    }

    void add(std::string word, int sign) {
        for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        words_.insert_or_assign(std::move(word), sign);
    }

    int sign(const std::string& token) const {
        const auto it = words_.find(token);
        return it == words_.end() ? 0 : it->second;
    }

    std::size_t size() const { return words_.size(); }

private:
    std::unordered_map<std::string, int> words_;
};

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

// Add-one smoothed class probabilities from lexicon hit counts: with a
// positive hits, b negative hits and m tokens,
//   p_pos = (a+1)/Z, p_neg = (b+1)/Z, p_neu = (m+1)/Z, Z = a+b+m+3.
inline ClassProbs lexicon_score(std::string_view text, const Lexicon& lexicon) {
    const auto tokens = tokenize(text);
    double a = 0, b = 0;
    for (const auto& t : tokens) {
        const int s = lexicon.sign(t);
        if (s > 0) a += 1;
        if (s < 0) b += 1;
    }
    const double m = static_cast<double>(tokens.size());
    const double z = a + b + m + 3.0;
    return {(b + 1.0) / z, (m + 1.0) / z, (a + 1.0) / z};
}

struct LoadedScores {
    std::vector<ScoredHeadline> headlines;
    std::vector<std::size_t> rejected_lines;  // 1-based
};

// Reads the line-delimited JSON score contract. Lines that fail to parse or
// violate the probability invariants are rejected; more than 1% rejected
// lines is treated as a broken producer.
inline LoadedScores load_headline_scores(std::istream& in, const std::string& name = "<scores>") {
    LoadedScores out;
    std::string line;
    std::size_t lineno = 0, records = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        ++records;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto date = parse_date(j.at("date").get<std::string>());
            ClassProbs probs{j.at("p_neg").get<double>(), j.at("p_neu").get<double>(), j.at("p_pos").get<double>()};
            const double gold = (j.contains("goldstein") ? j.at("goldstein") : j.at("goldstein_scale")).get<double>();
            if (!date || !probs.valid() || !std::isfinite(gold) || gold < -10.0 || gold > 10.0) {
                out.rejected_lines.push_back(lineno);
                continue;
            }
            out.headlines.push_back({*date, polarity(probs), gold, probs, j.at("headline").get<std::string>()});
        } catch (const nlohmann::json::exception&) {
            out.rejected_lines.push_back(lineno);
        }
    }
    if (records > 0 && out.rejected_lines.size() * 100 > records) {
        std::string lines;
        for (std::size_t i = 0; i < out.rejected_lines.size() && i < 10; ++i)
            lines += (i ? "," : "") + std::to_string(out.rejected_lines[i]);
        throw DataError(name + ": " + std::to_string(out.rejected_lines.size()) + " of " + std::to_string(records) +
                        " lines rejected (lines " + lines + (out.rejected_lines.size() > 10 ? ",..." : "") + ")");
    }
    return out;
}

inline LoadedScores load_headline_scores(const std::string& path) {
    auto in = csv::open_input(path);
    return load_headline_scores(in, path);
}

inline void write_score_line(std::ostream& out, const Date& date, const std::string& headline, const ClassProbs& p,
                             double goldstein) {
    nlohmann::ordered_json j;
    j["date"] = date.iso();
    j["headline"] = headline;
    j["p_neg"] = p.p_neg;
    j["p_neu"] = p.p_neu;
    j["p_pos"] = p.p_pos;
    j["goldstein"] = goldstein;
    out << j.dump() << '\n';
}

namespace detail_agg {

// Population (1/N) dispersion.
inline DailySentiment finish(const Date& date, const std::vector<double>& s, const std::vector<double>& g) {
    DailySentiment d;
    d.date = date;
    const double n = static_cast<double>(s.size());
    d.volume = static_cast<long long>(s.size());
    double ms = 0, mg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        ms += s[i];
        mg += g[i];
    }
    ms /= n;
    mg /= n;
    double vs = 0, vg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        vs += (s[i] - ms) * (s[i] - ms);
        vg += (g[i] - mg) * (g[i] - mg);
    }
    d.mean_sentiment = ms;
    d.sentiment_std = std::sqrt(vs / n);
    d.log_volume = std::log1p(n);
    d.article_impact = ms * d.log_volume;
    d.goldstein_mean = mg;
    d.goldstein_std = std::sqrt(vg / n);
    return d;
}

}  // namespace detail_agg

// One row per distinct date, ascending. Two-pass mean/deviation per day, so
// the result does not depend on headline order within a date.
inline std::vector<DailySentiment> aggregate_daily(const std::vector<ScoredHeadline>& headlines) {
    std::map<Date, std::vector<std::pair<double, double>>> by_date;
    for (const auto& h : headlines) by_date[h.date].emplace_back(h.polarity, h.goldstein_scale);
    std::vector<DailySentiment> out;
    out.reserve(by_date.size());
    for (auto& [date, items] : by_date) {
        // sorting makes floating-point summation order canonical
        std::sort(items.begin(), items.end());
        std::vector<double> s, g;
        for (const auto& [p, gs] : items) {
            s.push_back(p);
            g.push_back(gs);
        }
        out.push_back(detail_agg::finish(date, s, g));
    }
    return out;
}

inline const std::vector<std::string>& daily_columns() {
    static const std::vector<std::string> cols = {"date",           "sentiment_mean", "sentiment_std", "volume",
                                                  "log_volume",     "article_impact", "goldstein_mean",
                                                  "goldstein_std"};
    return cols;
}

inline void write_daily(std::ostream& out, const std::vector<DailySentiment>& days) {
    csv::write_row(out, daily_columns());
    for (const auto& d : days)
        csv::write_row(out, {d.date.iso(), format_double(d.mean_sentiment), format_double(d.sentiment_std),
                             std::to_string(d.volume), format_double(d.log_volume), format_double(d.article_impact),
                             format_double(d.goldstein_mean), format_double(d.goldstein_std)});
}

}  // namespace macrosent::sentiment
