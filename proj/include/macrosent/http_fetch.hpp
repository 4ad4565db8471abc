#pragma once

// Optional live headline fetcher. Only the CLI's `ingest --fetch` path uses
// it; tests exercise title extraction on fixed HTML strings.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include "macrosent/core.hpp"
#include "macrosent/ingest.hpp"

namespace macrosent::ingest {

namespace detail_html {

inline std::string decode_entities(std::string s) {
    static const std::pair<std::string_view, std::string_view> table[] = {
        {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"}, {"&nbsp;", " "}};
    for (const auto& [from, to] : table) {
        for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
            s.replace(pos, from.size(), to);
    }
    return s;
}

inline std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
        } else {
            if (space) out.push_back(' ');
            space = false;
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace detail_html

// Text of the first <title> element, falling back to the og:title meta
// property. Returns an empty string when neither yields text.
inline std::string extract_title(std::string_view html) {
    static const std::regex title_re(R"(<title[^>]*>([\s\S]*?)</title\s*>)", std::regex::icase);
    static const std::regex og_re(R"(<meta\s[^>]*property\s*=\s*["']og:title["'][^>]*>)", std::regex::icase);
    static const std::regex content_re(R"(content\s*=\s*"([^"]*)\"|content\s*=\s*'([^']*)')", std::regex::icase);

    const std::string doc(html);
    std::smatch m;
    if (std::regex_search(doc, m, title_re)) {
        auto text = detail_html::collapse_ws(detail_html::decode_entities(m[1].str()));
        if (!text.empty()) return text;
    }
    if (std::regex_search(doc, m, og_re)) {
        const std::string tag = m[0].str();
        std::smatch c;
        if (std::regex_search(tag, c, content_re)) {
            const auto raw = c[1].matched ? c[1].str() : c[2].str();
            return detail_html::collapse_ws(detail_html::decode_entities(raw));
        }
    }
    return {};
}

// Writes `<sha256(url)>.txt` into a cache directory so later runs resolve
// through HeadlineStore without the network. Failed fetches are cached as
// empty files, which the store treats as unresolved.
template <class Fetch>
std::size_t fill_headline_cache(const std::vector<EventRecord>& events, const std::filesystem::path& cache_dir,
                                Fetch&& fetch_html) {
    std::filesystem::create_directories(cache_dir);
    std::size_t fetched = 0;
    for (const auto& ev : events) {
        const auto file = cache_dir / (sha256_hex(ev.url) + ".txt");
        if (std::filesystem::exists(file)) continue;
        std::optional<std::string> html = fetch_html(ev.url);
        std::ofstream out(file, std::ios::binary);
        if (html) out << extract_title(*html);
        ++fetched;
    }
    return fetched;
}

}  // namespace macrosent::ingest
