#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <openssl/evp.h>

#include "macrosent/core.hpp"
#include "macrosent/csv.hpp"

namespace macrosent::ingest {

struct EventRecord {
    Date date;
    int event_code = 0;
    double goldstein_scale = 0.0;
    long long num_articles = 0;
    std::string url;
    std::optional<std::string> actor1;
    std::optional<std::string> actor2;
};

struct HeadlineRecord {
    Date date;
    std::string headline;
    double goldstein_scale = 0.0;
    std::string url;
};

struct ParsedEvents {
    std::vector<EventRecord> events;
    std::size_t skipped = 0;
};

// Raw GDELT export column names and the normalized names they map to.
// EventBaseCode is the three-digit code; SQLDATE is YYYYMMDD.
inline const std::map<std::string, std::string, std::less<>>& gdelt_header_map() {
    static const std::map<std::string, std::string, std::less<>> m = {
        {"sqldate", "date"},
        {"eventbasecode", "event_type"},
        {"goldsteinscale", "goldstein_scale"},
        {"numarticles", "num_articles"},
        {"sourceurl", "url"},
        {"actor1name", "actor1"},
        {"actor2name", "actor2"},
    };
    return m;
}

inline ParsedEvents parse_events(std::istream& in, const std::string& name = "<events>") {
    // sniff the delimiter from the header line
    std::string first;
    if (!std::getline(in, first)) throw DataError(name + ": empty file, expected a header row");
    const char delim = first.find('\t') != std::string::npos ? '\t' : ',';
    std::istringstream header_stream(first);
    csv::Reader header_reader(header_stream, delim);
    csv::Row names;
    header_reader.next(names);
    for (auto& n : names) {
        std::string key(detail::trim(n));
        for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (auto it = gdelt_header_map().find(key); it != gdelt_header_map().end()) n = it->second;
    }
    const csv::Header header(names);
    const auto c_date = header.require("date", name);
    const auto c_code = header.require("event_type", name);
    const auto c_gold = header.require("goldstein_scale", name);
    const auto c_num = header.require("num_articles", name);
    const auto c_url = header.require("url", name);
    const auto c_a1 = header.find("actor1");
    const auto c_a2 = header.find("actor2");
    const std::size_t width = std::max({c_date, c_code, c_gold, c_num, c_url}) + 1;

    ParsedEvents out;
    csv::Reader reader(in, delim);
    csv::Row row;
    while (reader.next(row)) {
        if (csv::is_blank(row)) continue;
        if (row.size() < width) {
            ++out.skipped;
            continue;
        }
        const auto date = parse_date(row[c_date]);
        const auto code = detail::parse_number<int>(row[c_code]);
        const auto gold = detail::parse_number<double>(row[c_gold]);
        const auto num = detail::parse_number<long long>(row[c_num]);
        if (!date || !code || !gold || !num || *code < 0 || *code > 999 || *gold < -10.0 || *gold > 10.0 || *num < 0) {
            ++out.skipped;
            continue;
        }
        EventRecord ev{*date, *code, *gold, *num, std::string(detail::trim(row[c_url])), std::nullopt, std::nullopt};
        if (c_a1 && *c_a1 < row.size() && !row[*c_a1].empty()) ev.actor1 = row[*c_a1];
        if (c_a2 && *c_a2 < row.size() && !row[*c_a2].empty()) ev.actor2 = row[*c_a2];
        out.events.push_back(std::move(ev));
    }
    return out;
}

inline ParsedEvents parse_events(const std::string& path) {
    auto in = csv::open_input(path);
    return parse_events(in, path);
}

// Keeps the 100-199 event-code family, order preserved.
inline std::vector<EventRecord> filter_macro_events(const std::vector<EventRecord>& events) {
    std::vector<EventRecord> out;
    std::copy_if(events.begin(), events.end(), std::back_inserter(out),
                 [](const EventRecord& e) { return e.event_code >= 100 && e.event_code <= 199; });
    return out;
}

// Per calendar date, the k most-covered events: descending num_articles, then
// ascending URL. Output is grouped by ascending date in ranked order and does
// not depend on input order.
inline std::vector<EventRecord> select_top_daily(std::vector<EventRecord> events, std::size_t k = 100) {
    if (k == 0) throw UsageError("select_top_daily: k must be >= 1");
    std::stable_sort(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
        if (a.date != b.date) return a.date < b.date;
        if (a.num_articles != b.num_articles) return a.num_articles > b.num_articles;
        if (a.url != b.url) return a.url < b.url;
        // remaining fields only order exact (count, URL) duplicates
        return std::tie(a.event_code, a.goldstein_scale, a.actor1, a.actor2) <
               std::tie(b.event_code, b.goldstein_scale, b.actor1, b.actor2);
    });
    std::vector<EventRecord> out;
    std::size_t taken = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (i == 0 || events[i].date != events[i - 1].date) taken = 0;
        if (taken < k) {
            out.push_back(std::move(events[i]));
            ++taken;
        }
    }
    return out;
}

inline std::string sha256_hex(std::string_view text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

// URL -> headline text. Backed either by a directory of `<sha256(url)>.txt`
// files or by a two-column `url,headline` file loaded into memory.
class HeadlineStore {
public:
    static HeadlineStore open(const std::filesystem::path& path) {
        namespace fs = std::filesystem;
        std::error_code ec;
        const auto status = fs::status(path, ec);
        if (ec || !fs::exists(status)) throw DataError("headline store '" + path.string() + "' is unreadable");
        HeadlineStore store;
        if (fs::is_directory(status)) {
            store.dir_ = path;
            return store;
        }
        auto in = csv::open_input(path.string());
        csv::Reader reader(in);
        csv::Row row;
        if (!reader.next(row)) return store;
        const csv::Header header(row);
        const auto c_url = header.require("url", path.string());
        const auto c_head = header.require("headline", path.string());
        while (reader.next(row)) {
            if (row.size() <= std::max(c_url, c_head)) continue;
            store.table_.insert_or_assign(std::string(detail::trim(row[c_url])), row[c_head]);
        }
        return store;
    }

    static HeadlineStore from_map(std::unordered_map<std::string, std::string> table) {
        HeadlineStore store;
        store.table_ = std::move(table);
        return store;
    }

    // Trimmed headline text, or nullopt when the URL is unknown.
    std::optional<std::string> lookup(const std::string& url) const {
        if (dir_) {
            std::ifstream in(*dir_ / (sha256_hex(url) + ".txt"), std::ios::binary);
            if (!in) return std::nullopt;
            std::ostringstream ss;
            ss << in.rdbuf();
            return std::string(detail::trim(ss.str()));
        }
        const auto it = table_.find(url);
        if (it == table_.end()) return std::nullopt;
        return std::string(detail::trim(it->second));
    }

private:
    std::optional<std::filesystem::path> dir_;
    std::unordered_map<std::string, std::string> table_;
};

struct ResolvedHeadlines {
    std::vector<HeadlineRecord> headlines;
    std::size_t dropped = 0;
};

// Joins events to headline text. Unknown URLs and empty text are dropped.
// Lookups run on up to `workers` threads; output order follows input order.
inline ResolvedHeadlines resolve_headlines(const std::vector<EventRecord>& events, const HeadlineStore& store,
                                           unsigned workers = 1) {
    std::vector<std::optional<std::string>> text(events.size());
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(events.size())));
    std::atomic<std::size_t> cursor{0};
    auto work = [&] {
        for (std::size_t i; (i = cursor.fetch_add(1)) < events.size();) text[i] = store.lookup(events[i].url);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    ResolvedHeadlines out;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!text[i] || text[i]->empty()) {
            ++out.dropped;
            continue;
        }
        out.headlines.push_back({events[i].date, std::move(*text[i]), events[i].goldstein_scale, events[i].url});
    }
    return out;
}

inline void write_headlines(std::ostream& out, const std::vector<HeadlineRecord>& rows) {
    csv::write_row(out, {"date", "headline", "goldstein_scale", "url"});
    for (const auto& r : rows) csv::write_row(out, {r.date.iso(), r.headline, format_double(r.goldstein_scale), r.url});
}

inline std::vector<HeadlineRecord> read_headlines(const std::string& path) {
    auto in = csv::open_input(path);
    csv::Reader reader(in);
    csv::Row row;
    if (!reader.next(row)) throw DataError(path + ": empty file, expected a header row");
    const csv::Header header(row);
    const auto c_date = header.require("date", path);
    const auto c_head = header.require("headline", path);
    const auto c_gold = header.require("goldstein_scale", path);
    const auto c_url = header.find("url");
    std::vector<HeadlineRecord> out;
    while (reader.next(row)) {
        if (csv::is_blank(row)) continue;
        if (row.size() <= std::max(c_date, std::max(c_head, c_gold)))
            throw DataError(path + ":" + std::to_string(reader.line()) + ": too few columns");
        const auto date = parse_date(row[c_date]);
        const auto gold = detail::parse_number<double>(row[c_gold]);
        if (!date || !gold) throw DataError(path + ":" + std::to_string(reader.line()) + ": unparseable row");
        std::string text(detail::trim(row[c_head]));
        if (text.empty()) continue;
        out.push_back({*date, std::move(text), *gold, c_url && *c_url < row.size() ? row[*c_url] : std::string{}});
    }
    return out;
}

}  // namespace macrosent::ingest
