#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "macrosent/core.hpp"

namespace macrosent::csv {

using Row = std::vector<std::string>;

// RFC-4180 record reader: quoted fields may contain the delimiter, doubled
// quotes and line breaks. Tracks the physical line on which each record starts.
class Reader {
public:
    explicit Reader(std::istream& in, char delimiter = ',') : in_(in), delim_(delimiter) {}

    // Returns false at end of input. A trailing '\r' before '\n' is dropped.
    bool next(Row& row) {
        row.clear();
        record_line_ = line_ + 1;
        std::string field;
        bool in_quotes = false;
        bool any = false;
        int c;
        while ((c = in_.get()) != EOF) {
            any = true;
            const char ch = static_cast<char>(c);
            if (in_quotes) {
                if (ch == '"') {
                    if (in_.peek() == '"') {
                        field.push_back('"');
                        in_.get();
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (ch == '\n') ++line_;
                    field.push_back(ch);
                }
                continue;
            }
            if (ch == '"') {
                in_quotes = true;
            } else if (ch == delim_) {
                row.push_back(std::move(field));
                field.clear();
            } else if (ch == '\n') {
                ++line_;
                if (!field.empty() && field.back() == '\r') field.pop_back();
                row.push_back(std::move(field));
                return true;
            } else {
                field.push_back(ch);
            }
        }
        if (!any) return false;
        if (!field.empty() && field.back() == '\r') field.pop_back();
        row.push_back(std::move(field));
        ++line_;
        return true;
    }

    // 1-based physical line of the record most recently returned.
    std::size_t line() const { return record_line_; }

private:
    std::istream& in_;
    char delim_;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
};

inline bool is_blank(const Row& row) {
    for (const auto& f : row)
        if (!detail::trim(f).empty()) return false;
    return true;
}

inline std::string quote(std::string_view field, char delimiter = ',') {
    if (field.find_first_of(std::string{'"', '\n', '\r', delimiter}) == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const Row& row, char delimiter = ',') {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.put(delimiter);
        out << quote(row[i], delimiter);
    }
    out.put('\n');
}

// Maps lower-cased, trimmed header names to column positions.
class Header {
public:
    Header() = default;
    explicit Header(const Row& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            std::string key(detail::trim(names[i]));
            // strip a UTF-8 byte-order mark on the first column
            if (i == 0 && key.rfind("\xEF\xBB\xBF", 0) == 0) key.erase(0, 3);
            for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            index_.emplace(std::move(key), i);
        }
    }

    std::optional<std::size_t> find(std::string_view name) const {
        const auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t require(std::string_view name, std::string_view file) const {
        if (auto i = find(name)) return *i;
        throw DataError(std::string(file) + ": missing mandatory column '" + std::string(name) + "'");
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    return out;
}

}  // namespace macrosent::csv
