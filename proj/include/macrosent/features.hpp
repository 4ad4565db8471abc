#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macrosent/core.hpp"
#include "macrosent/csv.hpp"
#include "macrosent/market.hpp"
#include "macrosent/sentiment.hpp"

namespace macrosent::features {

using sentiment::DailySentiment;

// Longest lag/rolling window used by any feature, in trading days.
inline constexpr std::size_t kMaxWindow = 20;

// Dense row-major design matrix with aligned labels and realized next-day
// returns. Row i is built from information dated <= dates[i].
struct FeatureMatrix {
    std::vector<Date> dates;
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<int> labels;
    std::vector<double> next_returns;

    std::size_t rows() const { return dates.size(); }
    std::size_t cols() const { return names.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows());
        for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
        return out;
    }

    // Rows [begin, end).
    FeatureMatrix slice(std::size_t begin, std::size_t end) const {
        FeatureMatrix m;
        m.names = names;
        m.dates.assign(dates.begin() + begin, dates.begin() + end);
        m.values.assign(values.begin() + begin * cols(), values.begin() + end * cols());
        m.labels.assign(labels.begin() + begin, labels.begin() + end);
        m.next_returns.assign(next_returns.begin() + begin, next_returns.begin() + end);
        return m;
    }

    std::optional<std::size_t> column_index(const std::string& name) const {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) return std::nullopt;
        return static_cast<std::size_t>(it - names.begin());
    }
};

// Column order of the feature matrix. These names are a stable file contract.
inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "sentiment_mean",      "sentiment_std",       "log_volume",          "article_impact",
        "goldstein_mean",      "goldstein_std",       "sentiment_lag1",      "sentiment_lag2",
        "sentiment_lag3",      "sentiment_std_lag1",  "sentiment_std_lag2",  "sentiment_std_lag3",
        "log_volume_lag1",     "log_volume_lag2",     "log_volume_lag3",     "goldstein_mean_lag1",
        "goldstein_mean_lag2", "goldstein_mean_lag3", "sentiment_ma5",       "sentiment_ma20",
        "sentiment_accel",     "sentiment_rollstd5",  "sentiment_rollstd10", "volume_rollsum5",
        "volume_rollsum10",    "return_lag1",         "volatility_20d",
    };
    return names;
}

// Recombines several days' aggregates into one, as if computed over the union
// of their headlines: count-weighted means, exact population variances.
inline DailySentiment pool_days(const Date& date, std::span<const DailySentiment> days) {
    DailySentiment out;
    out.date = date;
    long long n = 0;
    double ss = 0, ss2 = 0, sg = 0, sg2 = 0;
    for (const auto& d : days) {
        if (!d.valid()) continue;
        const double w = static_cast<double>(d.volume);
        n += d.volume;
        ss += w * d.mean_sentiment;
        ss2 += w * (d.sentiment_std * d.sentiment_std + d.mean_sentiment * d.mean_sentiment);
        sg += w * d.goldstein_mean;
        sg2 += w * (d.goldstein_std * d.goldstein_std + d.goldstein_mean * d.goldstein_mean);
    }
    if (n == 0) return out;
    const double nn = static_cast<double>(n);
    out.volume = n;
    out.mean_sentiment = ss / nn;
    out.sentiment_std = std::sqrt(std::max(0.0, ss2 / nn - out.mean_sentiment * out.mean_sentiment));
    out.log_volume = std::log1p(nn);
    out.article_impact = out.mean_sentiment * out.log_volume;
    out.goldstein_mean = sg / nn;
    out.goldstein_std = std::sqrt(std::max(0.0, sg2 / nn - out.goldstein_mean * out.goldstein_mean));
    return out;
}

enum class NonTradingNews { pool_into_next, drop };

// One row per trading date. With pooling, news dated after the previous
// trading date and up to this one is recombined into this date; with drop,
// only same-day news counts. Trading days without news get volume 0.
inline std::vector<DailySentiment> merge_calendar(const std::vector<DailySentiment>& sentiment,
                                                  const std::vector<Date>& trading_dates,
                                                  NonTradingNews policy = NonTradingNews::pool_into_next) {
    if (trading_dates.empty()) throw DataError("merge_calendar: empty trading calendar");
    std::vector<DailySentiment> out;
    out.reserve(trading_dates.size());
    std::size_t s = 0;
    for (std::size_t t = 0; t < trading_dates.size(); ++t) {
        const Date& day = trading_dates[t];
        if (t > 0 && !(trading_dates[t - 1] < day)) throw DataError("merge_calendar: trading dates must be strictly increasing");
        std::vector<DailySentiment> bucket;
        for (; s < sentiment.size() && sentiment[s].date <= day; ++s) {
            const bool same_day = sentiment[s].date == day;
            const bool after_prev = t > 0 && trading_dates[t - 1] < sentiment[s].date;
            if (same_day || (policy == NonTradingNews::pool_into_next && after_prev)) bucket.push_back(sentiment[s]);
        }
        if (bucket.size() == 1 && bucket.front().date == day) {
            out.push_back(bucket.front());
        } else {
            out.push_back(pool_days(day, bucket));
        }
    }
    return out;
}

// One trading day on the aligned calendar: sentiment and market state known
// at the close of `date`, plus the return realized over the next bar.
struct AlignedDay {
    Date date;
    DailySentiment sentiment;
    std::optional<double> lagged_return;
    std::optional<double> vol20;
    double next_return = 0.0;
    int label = 0;
};

// Aligned calendar from bars d_0..d_{n-1}: days d_1..d_{n-2}, i.e. every bar
// with both a realized return and a next-bar return. `daily` must hold one
// entry per bar date (the output of merge_calendar over the bar dates).
inline std::vector<AlignedDay> align(const std::vector<DailySentiment>& daily, const std::vector<market::PriceBar>& prices,
                                     std::size_t vol_window = 20) {
    if (prices.size() < 3) throw DataError("align: need at least 3 price bars");
    const auto returns = market::log_returns(prices);
    const auto vol = market::realized_vol(returns, vol_window);
    std::map<Date, const DailySentiment*> by_date;
    for (const auto& d : daily) by_date.emplace(d.date, &d);
    std::vector<AlignedDay> out;
    out.reserve(prices.size() - 2);
    for (std::size_t i = 1; i + 1 < prices.size(); ++i) {
        AlignedDay a;
        a.date = prices[i].date;
        if (auto it = by_date.find(a.date); it != by_date.end()) a.sentiment = *it->second;
        a.sentiment.date = a.date;
        a.lagged_return = returns[i - 1].log_return;
        a.vol20 = vol[i - 1];
        a.next_return = returns[i].log_return;
        a.label = market::direction(a.next_return);
        out.push_back(std::move(a));
    }
    return out;
}

struct BuildStats {
    std::size_t aligned = 0;
    std::size_t warm_up = 0;
    std::size_t invalid = 0;
};

namespace detail_feat {

inline double window_mean(std::span<const AlignedDay> days, std::size_t end, std::size_t w) {
    double s = 0;
    for (std::size_t k = end + 1 - w; k <= end; ++k) s += days[k].sentiment.mean_sentiment;
    return s / static_cast<double>(w);
}

// Sample (1/(w-1)) standard deviation of S over the window.
inline double window_std(std::span<const AlignedDay> days, std::size_t end, std::size_t w) {
    const double m = window_mean(days, end, w);
    double ss = 0;
    for (std::size_t k = end + 1 - w; k <= end; ++k) {
        const double d = days[k].sentiment.mean_sentiment - m;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(w - 1));
}

inline double window_volume(std::span<const AlignedDay> days, std::size_t end, std::size_t w) {
    long long n = 0;
    for (std::size_t k = end + 1 - w; k <= end; ++k) n += days[k].sentiment.volume;
    return static_cast<double>(n);
}

}  // namespace detail_feat

// Emits one row per aligned day whose full 20-day history is populated: the
// first `warm_up` days are skipped, as is any day whose window contains a
// no-news day or missing market state.
inline FeatureMatrix build_feature_matrix(std::span<const AlignedDay> days, std::size_t warm_up = kMaxWindow,
                                          BuildStats* stats = nullptr) {
    if (warm_up < kMaxWindow)
        throw UsageError("warm_up must be at least the longest feature window (" + std::to_string(kMaxWindow) + ")");
    if (days.size() <= warm_up)
        throw DataError("build_feature_matrix: " + std::to_string(days.size()) + " aligned days, warm-up needs more than " +
                        std::to_string(warm_up));
    FeatureMatrix m;
    m.names = feature_names();
    BuildStats local{days.size(), warm_up, 0};
    // last index at which a no-news day was seen
    std::optional<std::size_t> last_gap;
    for (std::size_t t = 0; t < days.size(); ++t) {
        if (!days[t].sentiment.valid()) last_gap = t;
        if (t < warm_up) continue;
        const bool gap = last_gap && *last_gap + kMaxWindow > t;
        if (gap || !days[t].lagged_return || !days[t].vol20) {
            ++local.invalid;
            continue;
        }
        const auto& d = days[t].sentiment;
        const auto lag = [&](std::size_t k) -> const DailySentiment& { return days[t - k].sentiment; };
        const double ma5 = detail_feat::window_mean(days, t, 5);
        const double ma20 = detail_feat::window_mean(days, t, 20);
        const double row[] = {
            d.mean_sentiment,
            d.sentiment_std,
            d.log_volume,
            d.article_impact,
            d.goldstein_mean,
            d.goldstein_std,
            lag(1).mean_sentiment,
            lag(2).mean_sentiment,
            lag(3).mean_sentiment,
            lag(1).sentiment_std,
            lag(2).sentiment_std,
            lag(3).sentiment_std,
            lag(1).log_volume,
            lag(2).log_volume,
            lag(3).log_volume,
            lag(1).goldstein_mean,
            lag(2).goldstein_mean,
            lag(3).goldstein_mean,
            ma5,
            ma20,
            ma5 - ma20,
            detail_feat::window_std(days, t, 5),
            detail_feat::window_std(days, t, 10),
            detail_feat::window_volume(days, t, 5),
            detail_feat::window_volume(days, t, 10),
            *days[t].lagged_return,
            *days[t].vol20,
        };
        static_assert(std::size(row) == 27);
        m.dates.push_back(days[t].date);
        m.values.insert(m.values.end(), std::begin(row), std::end(row));
        m.labels.push_back(days[t].label);
        m.next_returns.push_back(days[t].next_return);
    }
    if (stats) *stats = local;
    return m;
}

inline FeatureMatrix build_feature_matrix(const std::vector<AlignedDay>& days, std::size_t warm_up = kMaxWindow,
                                          BuildStats* stats = nullptr) {
    return build_feature_matrix(std::span<const AlignedDay>(days), warm_up, stats);
}

// Per-feature training statistics for z-scoring (population convention).
struct Scaler {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<bool> constant;
};

inline Scaler fit_scaler(const FeatureMatrix& train) {
    if (train.rows() == 0) throw DataError("fit_scaler: empty training set");
    Scaler s;
    const std::size_t p = train.cols();
    const double n = static_cast<double>(train.rows());
    s.mean.assign(p, 0.0);
    s.std.assign(p, 0.0);
    s.constant.assign(p, false);
    for (std::size_t c = 0; c < p; ++c) {
        double m = 0;
        for (std::size_t r = 0; r < train.rows(); ++r) m += train.at(r, c);
        m /= n;
        double ss = 0;
        for (std::size_t r = 0; r < train.rows(); ++r) ss += (train.at(r, c) - m) * (train.at(r, c) - m);
        s.mean[c] = m;
        s.std[c] = std::sqrt(ss / n);
        s.constant[c] = s.std[c] == 0.0;
    }
    return s;
}

// Constant features pass through unchanged.
inline FeatureMatrix apply_scaler(const Scaler& s, FeatureMatrix rows) {
    if (s.mean.size() != rows.cols()) throw DataError("apply_scaler: feature count mismatch");
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t c = 0; c < rows.cols(); ++c)
            if (!s.constant[c]) rows.at(r, c) = (rows.at(r, c) - s.mean[c]) / s.std[c];
    return rows;
}

inline void write_matrix(std::ostream& out, const FeatureMatrix& m) {
    csv::Row header{"date"};
    header.insert(header.end(), m.names.begin(), m.names.end());
    header.push_back("label");
    header.push_back("next_return");
    csv::write_row(out, header);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        csv::Row row{m.dates[r].iso()};
        for (double v : m.row(r)) row.push_back(format_double(v));
        row.push_back(std::to_string(m.labels[r]));
        row.push_back(format_double(m.next_returns[r]));
        csv::write_row(out, row);
    }
}

inline FeatureMatrix read_matrix(std::istream& in, const std::string& name = "<features>") {
    csv::Reader reader(in);
    csv::Row row;
    if (!reader.next(row) || row.size() < 3 || row.front() != "date" || row[row.size() - 2] != "label" ||
        row.back() != "next_return")
        throw DataError(name + ": header must be `date,<features...>,label,next_return`");
    FeatureMatrix m;
    m.names.assign(row.begin() + 1, row.end() - 2);
    while (reader.next(row)) {
        if (csv::is_blank(row)) continue;
        const auto where = name + ":" + std::to_string(reader.line());
        if (row.size() != m.cols() + 3) throw DataError(where + ": wrong column count");
        const auto date = parse_date(row[0]);
        if (!date) throw DataError(where + ": bad date");
        if (!m.dates.empty() && !(m.dates.back() < *date)) throw DataError(where + ": dates must be strictly increasing");
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const auto v = detail::parse_number<double>(row[c + 1]);
            if (!v) throw DataError(where + ": non-numeric value for " + m.names[c]);
            m.values.push_back(*v);
        }
        const auto label = detail::parse_number<int>(row[m.cols() + 1]);
        const auto next = detail::parse_number<double>(row[m.cols() + 2]);
        if (!label || (*label != 0 && *label != 1) || !next) throw DataError(where + ": bad label or next_return");
        m.dates.push_back(*date);
        m.labels.push_back(*label);
        m.next_returns.push_back(*next);
    }
    return m;
}

}  // namespace macrosent::features
