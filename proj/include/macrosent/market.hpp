#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "macrosent/core.hpp"
#include "macrosent/csv.hpp"

namespace macrosent::market {

struct PriceBar {
    Date date;
    double close = 0.0;
};

// Log return realized on `date`, i.e. ln(close[date]) - ln(close[previous bar]).
struct ReturnPoint {
    Date date;
    double log_return = 0.0;
};

// Direction of the return realized on the following bar, keyed by feature date.
struct DirectionLabel {
    Date date;
    int label = 0;
};

// Sorted by date. Duplicate dates, non-positive closes and unparseable rows
// are hard errors.
inline std::vector<PriceBar> load_prices(std::istream& in, const std::string& name = "<prices>") {
    csv::Reader reader(in);
    csv::Row row;
    if (!reader.next(row)) throw DataError(name + ": empty file, expected header `date,close`");
    const csv::Header header(row);
    const auto c_date = header.require("date", name);
    const auto c_close = header.require("close", name);
    std::vector<PriceBar> bars;
    while (reader.next(row)) {
        if (csv::is_blank(row)) continue;
        const auto where = name + ":" + std::to_string(reader.line());
        if (row.size() <= std::max(c_date, c_close)) throw DataError(where + ": too few columns");
        const auto date = parse_date(row[c_date]);
        const auto close = detail::parse_number<double>(row[c_close]);
        if (!date || !close) throw DataError(where + ": unparseable row");
        if (*close <= 0.0) throw DataError(where + ": non-positive close " + format_double(*close));
        bars.push_back({*date, *close});
    }
    std::sort(bars.begin(), bars.end(), [](const PriceBar& a, const PriceBar& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < bars.size(); ++i)
        if (bars[i].date == bars[i - 1].date) throw DataError(name + ": duplicate date " + bars[i].date.iso());
    return bars;
}

inline std::vector<PriceBar> load_prices(const std::string& path) {
    auto in = csv::open_input(path);
    return load_prices(in, path);
}

inline std::vector<ReturnPoint> log_returns(const std::vector<PriceBar>& prices) {
    if (prices.size() < 2) throw DataError("log_returns: need at least 2 price bars, got " + std::to_string(prices.size()));
    std::vector<ReturnPoint> out;
    out.reserve(prices.size() - 1);
    for (std::size_t i = 1; i < prices.size(); ++i)
        out.push_back({prices[i].date, std::log(prices[i].close) - std::log(prices[i - 1].close)});
    return out;
}

inline int direction(double next_return) { return next_return > 0.0 ? 1 : 0; }

// Label i is dated at the bar preceding return i: `feature_dates[i]` when
// given, otherwise the return's own date. Flat moves map to 0.
inline std::vector<DirectionLabel> direction_labels(const std::vector<ReturnPoint>& returns,
                                                    const std::vector<Date>& feature_dates = {}) {
    if (!feature_dates.empty() && feature_dates.size() != returns.size())
        throw DataError("direction_labels: feature date count does not match return count");
    std::vector<DirectionLabel> out;
    out.reserve(returns.size());
    for (std::size_t i = 0; i < returns.size(); ++i)
        out.push_back({feature_dates.empty() ? returns[i].date : feature_dates[i], direction(returns[i].log_return)});
    return out;
}

// Annualized rolling sample standard deviation of the last `window` returns,
// ending at each point. The first window-1 entries are missing.
inline std::vector<std::optional<double>> realized_vol(const std::vector<ReturnPoint>& returns, std::size_t window = 20) {
    if (window < 2) throw UsageError("realized_vol: window must be >= 2");
    std::vector<std::optional<double>> out(returns.size());
    for (std::size_t t = window - 1; t < returns.size(); ++t) {
        double mean = 0;
        for (std::size_t j = t + 1 - window; j <= t; ++j) mean += returns[j].log_return;
        mean /= static_cast<double>(window);
        double ss = 0;
        for (std::size_t j = t + 1 - window; j <= t; ++j) {
            const double d = returns[j].log_return - mean;
            ss += d * d;
        }
        out[t] = std::sqrt(ss / static_cast<double>(window - 1)) * std::sqrt(kTradingDaysPerYear);
    }
    return out;
}

}  // namespace macrosent::market
