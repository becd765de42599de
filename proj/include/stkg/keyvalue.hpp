#pragma once

// Plain-text `key = value` files and the scalar/list parsing shared by the
// config readers.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stkg/error.hpp"

namespace stkg {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

/// Parses a finite double; rejects trailing garbage, NaN and infinities.
inline double parse_double(std::string_view text, std::string_view what) {
    const auto s = detail::trim(text);
    double value = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (s.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw FormatError(std::string(what) + ": not a finite number: '" + std::string(s) + "'");
    }
    return value;
}

inline std::int64_t parse_int(std::string_view text, std::string_view what) {
    const auto s = detail::trim(text);
    std::int64_t value = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc{} || ptr != end) {
        throw FormatError(std::string(what) + ": not an integer: '" + std::string(s) + "'");
    }
    return value;
}

inline std::vector<double> parse_double_list(std::string_view text, std::string_view what) {
    std::vector<double> out;
    for (auto item : detail::split(text, ',')) out.push_back(parse_double(item, what));
    return out;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Ordered `key = value` store. Lines starting with '#' and blank lines are
/// ignored on read.
class KeyValues {
public:
    KeyValues() = default;

    static KeyValues parse(std::istream& in, std::string_view source = "<stream>") {
        KeyValues kv;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto t = detail::trim(line);
            if (t.empty() || t.front() == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string_view::npos) {
                throw FormatError(std::string(source) + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            }
            const auto key = std::string(detail::trim(t.substr(0, eq)));
            if (key.empty()) {
                throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": empty key");
            }
            if (kv.contains(key)) {
                throw FormatError(std::string(source) + ":" + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
            }
            kv.set(key, std::string(detail::trim(t.substr(eq + 1))));
        }
        return kv;
    }

    static KeyValues load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open '" + path + "'");
        return parse(in, path);
    }

    void set(const std::string& key, std::string value) {
        if (!values_.contains(key)) order_.push_back(key);
        values_[key] = std::move(value);
    }

    [[nodiscard]] bool contains(const std::string& key) const { return values_.contains(key); }

    [[nodiscard]] const std::string& get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
        return it->second;
    }

    [[nodiscard]] const std::vector<std::string>& keys() const { return order_; }

    void write(std::ostream& out) const {
        for (const auto& k : order_) out << k << " = " << values_.at(k) << '\n';
    }

    [[nodiscard]] std::string str() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

}  // namespace stkg
