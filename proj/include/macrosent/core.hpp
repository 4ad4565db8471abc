#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace macrosent {

// Structural or data-quality failure in an input file or pipeline stage.
// The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments or configuration. The CLI maps it to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Calendar date with day resolution.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}}) {}

    constexpr std::chrono::sys_days days() const { return days_; }
    constexpr std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }

    constexpr Date next() const { return Date{days_ + std::chrono::days{1}}; }
    constexpr Date plus_days(int n) const { return Date{days_ + std::chrono::days{n}}; }

    // 0 = Sunday ... 6 = Saturday
    unsigned weekday() const { return std::chrono::weekday{days_}.c_encoding(); }

    std::string iso() const {
        const auto d = ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()), unsigned(d.month()), unsigned(d.day()));
        return buf;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;
    friend constexpr bool operator==(const Date&, const Date&) = default;

private:
    std::chrono::sys_days days_{};
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) return std::nullopt;
    }
    return value;
}

}  // namespace detail

// Accepts ISO-8601 `YYYY-MM-DD` (an optional `THH:MM:SS...` suffix is ignored)
// and the compact `YYYYMMDD` form used by raw event exports.
inline std::optional<Date> parse_date(std::string_view s) {
    s = detail::trim(s);
    if (const auto t = s.find_first_of("T "); t != std::string_view::npos) s = s.substr(0, t);
    std::optional<int> y;
    std::optional<unsigned> m, d;
    if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
        y = detail::parse_number<int>(s.substr(0, 4));
        m = detail::parse_number<unsigned>(s.substr(5, 2));
        d = detail::parse_number<unsigned>(s.substr(8, 2));
    } else if (s.size() == 8) {
        y = detail::parse_number<int>(s.substr(0, 4));
        m = detail::parse_number<unsigned>(s.substr(4, 2));
        d = detail::parse_number<unsigned>(s.substr(6, 2));
    }
    if (!y || !m || !d) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{*m}, std::chrono::day{*d}};
    if (!ymd.ok()) return std::nullopt;
    return Date{std::chrono::sys_days{ymd}};
}

// Shortest representation that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Fixed-point formatting for human-facing tables.
inline std::string format_fixed(double v, int digits) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    return std::string(buf, ptr);
}

inline constexpr double kTradingDaysPerYear = 252.0;

}  // namespace macrosent
