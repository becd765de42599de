#pragma once

// Space-time observation datasets: CSV ingestion and persistence, pull-based
// streaming in arrival order, and the affine map from dataset units onto the
// basis domain.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stkg/basis.hpp"
#include "stkg/error.hpp"
#include "stkg/keyvalue.hpp"
#include "stkg/rng.hpp"

namespace stkg {

struct Observation {
    std::vector<double> s;
    double t = 0.0;
    double y = 0.0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct DatasetHeader {
    std::vector<Interval> spatial_ranges;  ///< One per spatial dimension.
    Interval time_range;
    /// Any further `# key=value` lines (seed, generator, units, ...), verbatim
    /// and in file order.
    std::vector<std::pair<std::string, std::string>> extras;

    [[nodiscard]] int d() const { return static_cast<int>(spatial_ranges.size()); }

    [[nodiscard]] std::optional<std::string> extra(const std::string& key) const {
        for (const auto& [k, v] : extras) {
            if (k == key) return v;
        }
        return std::nullopt;
    }

    void set_extra(const std::string& key, std::string value) {
        for (auto& [k, v] : extras) {
            if (k == key) {
                v = std::move(value);
                return;
            }
        }
        extras.emplace_back(key, std::move(value));
    }

    [[nodiscard]] bool contains(const Observation& obs) const {
        if (obs.s.size() != spatial_ranges.size()) return false;
        for (std::size_t i = 0; i < obs.s.size(); ++i) {
            if (!spatial_ranges[i].contains(obs.s[i])) return false;
        }
        return time_range.contains(obs.t);
    }

    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Observation> rows;  ///< Stored order is the stream order.

    [[nodiscard]] std::size_t size() const { return rows.size(); }
    [[nodiscard]] bool empty() const { return rows.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string column_row(int d) {
    std::string out;
    for (int i = 1; i <= d; ++i) out += "s" + std::to_string(i) + ",";
    return out + "t,y";
}

inline bool is_reserved_key(const std::string& key) {
    if (key == "d" || key == "t_lo" || key == "t_hi") return true;
    return key.rfind("s_lo_", 0) == 0 || key.rfind("s_hi_", 0) == 0;
}

}  // namespace detail

/// Parses the CSV dialect: `# key=value` header lines (d, s_lo_i, s_hi_i,
/// t_lo, t_hi required), a column-name row `s1[,s2...],t,y`, then data rows.
inline Dataset read_csv(std::istream& in, const std::string& source = "<stream>") {
    const auto where = [&](std::size_t line) { return source + ":" + std::to_string(line) + ": "; };
    std::string line;
    std::size_t lineno = 0;
    KeyValues kv;
    std::vector<std::pair<std::string, std::string>> extras;

    // Header block.
    bool have_columns = false;
    std::string columns;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw FormatError(where(lineno) + "blank line in header");
        if (line.front() != '#') {
            columns = line;
            have_columns = true;
            break;
        }
        const auto body = detail::trim(std::string_view(line).substr(1));
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw FormatError(where(lineno) + "header line must be '# key=value'");
        const std::string key(detail::trim(body.substr(0, eq)));
        const std::string value(detail::trim(body.substr(eq + 1)));
        if (key.empty()) throw FormatError(where(lineno) + "empty header key");
        if (kv.contains(key)) throw FormatError(where(lineno) + "duplicate header key '" + key + "'");
        kv.set(key, value);
        if (!detail::is_reserved_key(key)) extras.emplace_back(key, value);
    }
    if (!have_columns) throw FormatError(source + ": missing column-name row");

    Dataset ds;
    const auto require = [&](const std::string& key) -> const std::string& {
        if (!kv.contains(key)) throw FormatError(source + ": missing header key '" + key + "'");
        return kv.get(key);
    };
    const auto located = [&](auto&& parse) {
        try {
            return parse();
        } catch (const FormatError& e) {
            throw FormatError(source + ": " + e.what());
        }
    };
    const auto number = [&](std::string_view text, const std::string& what) {
        return located([&] { return parse_double(text, what); });
    };
    const auto integer = [&](std::string_view text, const std::string& what) {
        return located([&] { return parse_int(text, what); });
    };
    const auto d = integer(require("d"), "header d");
    if (d < 1 || d > 8) throw FormatError(source + ": header d must be in [1, 8]");
    for (int i = 1; i <= d; ++i) {
        const auto idx = std::to_string(i);
        const Interval r{number(require("s_lo_" + idx), "s_lo_" + idx),
                         number(require("s_hi_" + idx), "s_hi_" + idx)};
        if (!(r.width() > 0.0)) throw FormatError(source + ": empty spatial range in dimension " + idx);
        ds.header.spatial_ranges.push_back(r);
    }
    ds.header.time_range = {number(require("t_lo"), "t_lo"), number(require("t_hi"), "t_hi")};
    if (!(ds.header.time_range.width() > 0.0)) throw FormatError(source + ": t_lo must be < t_hi");
    for (const auto& key : kv.keys()) {
        if (key.rfind("s_lo_", 0) == 0 || key.rfind("s_hi_", 0) == 0) {
            const auto idx = integer(key.substr(5), "header key " + key);
            if (idx < 1 || idx > d) throw FormatError(source + ": header key '" + key + "' beyond d");
        }
    }
    ds.header.extras = std::move(extras);

    const int di = static_cast<int>(d);
    if (std::string(detail::trim(columns)) != detail::column_row(di)) {
        throw FormatError(where(lineno) + "expected column row '" + detail::column_row(di) + "'");
    }

    const auto fields_expected = static_cast<std::size_t>(d) + 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw FormatError(where(lineno) + "blank line");
        if (line.front() == '#') throw FormatError(where(lineno) + "header line after data");
        const auto fields = detail::split(line, ',');
        if (fields.size() != fields_expected) {
            throw FormatError(where(lineno) + "expected " + std::to_string(fields_expected) + " fields, got " +
                              std::to_string(fields.size()));
        }
        Observation obs;
        try {
            for (int i = 0; i < di; ++i) obs.s.push_back(parse_double(fields[static_cast<std::size_t>(i)], "s"));
            obs.t = parse_double(fields[static_cast<std::size_t>(di)], "t");
            obs.y = parse_double(fields[static_cast<std::size_t>(di) + 1], "y");
        } catch (const FormatError& e) {
            throw FormatError(where(lineno) + e.what());
        }
        if (!ds.header.contains(obs)) throw DomainError(where(lineno) + "observation outside declared domain");
        ds.rows.push_back(std::move(obs));
    }
    return ds;
}

inline Dataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_csv(in, path);
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
    if (ds.empty()) throw ConfigError("refusing to write an empty dataset");
    const int d = ds.header.d();
    out << "# d=" << d << '\n';
    for (int i = 0; i < d; ++i) {
        const auto& r = ds.header.spatial_ranges[static_cast<std::size_t>(i)];
        out << "# s_lo_" << i + 1 << '=' << detail::format17(r.lo) << '\n';
        out << "# s_hi_" << i + 1 << '=' << detail::format17(r.hi) << '\n';
    }
    out << "# t_lo=" << detail::format17(ds.header.time_range.lo) << '\n';
    out << "# t_hi=" << detail::format17(ds.header.time_range.hi) << '\n';
    for (const auto& [k, v] : ds.header.extras) out << "# " << k << '=' << v << '\n';
    out << detail::column_row(d) << '\n';
    for (const auto& row : ds.rows) {
        if (row.s.size() != static_cast<std::size_t>(d)) throw ConfigError("row dimension does not match header");
        for (double v : row.s) out << detail::format17(v) << ',';
        out << detail::format17(row.t) << ',' << detail::format17(row.y) << '\n';
    }
}

/// Writes `contents` through a temporary file renamed into place, so a
/// failed run never leaves a partial file behind.
template <typename Writer>
void atomic_write(const std::string& path, Writer&& writer, bool binary = false) {
    const std::filesystem::path target(path);
    auto tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, binary ? std::ios::binary : std::ios::out);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        try {
            writer(out);
        } catch (...) {
            out.close();
            std::filesystem::remove(tmp);
            throw;
        }
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw Error("write to '" + tmp.string() + "' failed");
        }
    }
    std::filesystem::rename(tmp, target);
}

inline void write_csv(const Dataset& ds, const std::string& path) {
    if (ds.empty()) throw ConfigError("refusing to write an empty dataset");
    atomic_write(path, [&](std::ostream& out) { write_csv(ds, out); });
}

/// Single-consumer, pull-based view of a dataset's rows; stored order by
/// default, or a seeded permutation.
class ObservationStream {
public:
    explicit ObservationStream(const Dataset& ds) : ds_(&ds), order_(ds.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    ObservationStream(const Dataset& ds, std::uint64_t shuffle_seed) : ObservationStream(ds) {
        Rng rng(shuffle_seed);
        rng.shuffle(std::span<std::size_t>(order_));
    }

    /// Next observation, or nullptr when exhausted.
    const Observation* next() {
        if (pos_ >= order_.size()) return nullptr;
        return &ds_->rows[order_[pos_++]];
    }

    [[nodiscard]] std::size_t remaining() const { return order_.size() - pos_; }
    [[nodiscard]] const std::vector<std::size_t>& order() const { return order_; }

private:
    const Dataset* ds_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

/// Affine map from dataset units (header ranges) onto the basis domain:
/// each spatial range onto the basis range, [t_lo, t_hi] onto [0, R_t].
class DomainMap {
public:
    DomainMap(const DatasetHeader& header, const BasisConfig& basis) : header_(header), basis_(basis) {
        if (header.d() != basis.d()) {
            throw ConfigError("dataset has d=" + std::to_string(header.d()) + " but basis has d=" +
                              std::to_string(basis.d()));
        }
    }

    [[nodiscard]] SpaceTimePoint to_basis(std::span<const double> s, double t) const {
        if (s.size() != static_cast<std::size_t>(header_.d())) throw DomainError("point dimension mismatch");
        SpaceTimePoint pt;
        pt.s.resize(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto& from = header_.spatial_ranges[i];
            const auto& to = basis_.spatial_ranges()[i];
            if (!from.contains(s[i])) {
                throw DomainError("spatial coordinate " + format_double(s[i]) + " in dimension " +
                                  std::to_string(i + 1) + " outside dataset range");
            }
            pt.s[i] = map(s[i], from, to);
        }
        if (!header_.time_range.contains(t)) {
            throw DomainError("time " + format_double(t) + " outside dataset range");
        }
        pt.t = map(t, header_.time_range, Interval{0.0, basis_.r_t()});
        return pt;
    }

    [[nodiscard]] SpaceTimePoint to_basis(const Observation& obs) const { return to_basis(obs.s, obs.t); }

    [[nodiscard]] const DatasetHeader& header() const { return header_; }
    [[nodiscard]] const BasisConfig& basis() const { return basis_; }

private:
    static double map(double x, const Interval& from, const Interval& to) {
        if (x == from.lo) return to.lo;
        if (x == from.hi) return to.hi;
        const double u = (x - from.lo) / from.width();
        return std::clamp(to.lo + u * to.width(), to.lo, to.hi);
    }

    DatasetHeader header_;
    BasisConfig basis_;
};

}  // namespace stkg
