#pragma once

// Local-periodic space-time basis: compactly supported cubic spline
// components along each spatial dimension, combined by Kronecker product,
// times a constant-plus-sinusoid temporal basis on [0, R_t].

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stkg/error.hpp"
#include "stkg/keyvalue.hpp"

namespace stkg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct SpaceTimePoint {
    std::vector<double> s;
    double t = 0.0;

    friend bool operator==(const SpaceTimePoint&, const SpaceTimePoint&) = default;
};

/// Cubic spline component of support width L, in the frame where the
/// component indexed by `center_index` peaks at center_index * L / 4.
/// Zero outside [(c-2)L/4, (c+2)L/4]; peak value 2/3.
inline double spline_component(double s, long center_index, double L) {
    if (!std::isfinite(s)) throw DomainError("spline_component: non-finite coordinate");
    if (!(L > 0.0)) throw ConfigError("spline_component: support must be positive");
    const double f = 4.0 * s / L - static_cast<double>(center_index) + 2.0;
    if (f < 0.0 || f > 4.0) return 0.0;
    // Each piece is written around its nearer end so the outer knots give
    // exact zeros; algebraically identical to the textbook polynomials.
    if (f < 1.0) return f * f * f / 6.0;
    if (f < 2.0) {
        const double u = f - 1.0;
        return (((-3.0 * u + 3.0) * u + 3.0) * u + 1.0) / 6.0;
    }
    if (f < 3.0) {
        const double u = 3.0 - f;
        return (((-3.0 * u + 3.0) * u + 3.0) * u + 1.0) / 6.0;
    }
    const double u = 4.0 - f;
    return u * u * u / 6.0;
}

/// Full description of the basis; determines phi(s, t) completely.
class BasisConfig {
public:
    BasisConfig(std::vector<Interval> spatial_ranges, int ns, std::vector<double> supports,
                double r_t, int nt)
        : spatial_ranges_(std::move(spatial_ranges)),
          ns_(ns),
          supports_(std::move(supports)),
          r_t_(r_t),
          nt_(nt) {
        validate();
    }

    [[nodiscard]] int d() const { return static_cast<int>(spatial_ranges_.size()); }
    [[nodiscard]] int ns() const { return ns_; }
    [[nodiscard]] int nt() const { return nt_; }
    [[nodiscard]] double r_t() const { return r_t_; }
    [[nodiscard]] const std::vector<Interval>& spatial_ranges() const { return spatial_ranges_; }
    [[nodiscard]] const std::vector<double>& supports() const { return supports_; }

    /// Components per scale: ns^d.
    [[nodiscard]] std::size_t per_scale_size() const {
        std::size_t n = 1;
        for (int i = 0; i < d(); ++i) n *= static_cast<std::size_t>(ns_);
        return n;
    }
    [[nodiscard]] std::size_t spatial_size() const { return per_scale_size() * supports_.size(); }
    [[nodiscard]] std::size_t temporal_size() const { return static_cast<std::size_t>(nt_) + 1; }
    /// Dimension p of phi.
    [[nodiscard]] std::size_t p() const { return spatial_size() * temporal_size(); }

    /// Location of component `index` along dimension `dim`.
    [[nodiscard]] double center(int dim, int index) const {
        const auto& r = spatial_ranges_[static_cast<std::size_t>(dim)];
        if (index == ns_ - 1) return r.hi;
        return r.lo + r.width() * static_cast<double>(index) / static_cast<double>(ns_ - 1);
    }

    /// Reads the documented keys: d, ns, nt, supports, s_lo_i, s_hi_i, r_t
    /// (dimension index i is 1-based). Unknown keys are left to the caller.
    static BasisConfig from_keyvalues(const KeyValues& kv) {
        const auto d = parse_int(kv.get("d"), "d");
        if (d < 1 || d > 8) throw ConfigError("d must be in [1, 8]");
        std::vector<Interval> ranges;
        for (int i = 1; i <= d; ++i) {
            const auto idx = std::to_string(i);
            ranges.push_back({parse_double(kv.get("s_lo_" + idx), "s_lo_" + idx),
                              parse_double(kv.get("s_hi_" + idx), "s_hi_" + idx)});
        }
        return BasisConfig(std::move(ranges), static_cast<int>(parse_int(kv.get("ns"), "ns")),
                           parse_double_list(kv.get("supports"), "supports"),
                           parse_double(kv.get("r_t"), "r_t"),
                           static_cast<int>(parse_int(kv.get("nt"), "nt")));
    }

    static BasisConfig load(const std::string& path) { return from_keyvalues(KeyValues::load(path)); }

    [[nodiscard]] KeyValues to_keyvalues() const {
        KeyValues kv;
        kv.set("d", std::to_string(d()));
        kv.set("ns", std::to_string(ns_));
        kv.set("nt", std::to_string(nt_));
        std::string sup;
        for (std::size_t k = 0; k < supports_.size(); ++k) {
            if (k) sup += ",";
            sup += format_double(supports_[k]);
        }
        kv.set("supports", sup);
        for (int i = 0; i < d(); ++i) {
            const auto idx = std::to_string(i + 1);
            kv.set("s_lo_" + idx, format_double(spatial_ranges_[static_cast<std::size_t>(i)].lo));
            kv.set("s_hi_" + idx, format_double(spatial_ranges_[static_cast<std::size_t>(i)].hi));
        }
        kv.set("r_t", format_double(r_t_));
        return kv;
    }

    friend bool operator==(const BasisConfig&, const BasisConfig&) = default;

private:
    void validate() const {
        if (spatial_ranges_.empty()) throw ConfigError("basis: spatial dimension d must be >= 1");
        if (ns_ < 2) throw ConfigError("basis: ns must be >= 2");
        if (nt_ < 0) throw ConfigError("basis: nt must be >= 0");
        if (supports_.empty()) throw ConfigError("basis: at least one support width is required");
        if (!(r_t_ > 0.0) || !std::isfinite(r_t_)) throw ConfigError("basis: r_t must be positive");
        for (std::size_t i = 0; i < spatial_ranges_.size(); ++i) {
            const auto& r = spatial_ranges_[i];
            if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.width() > 0.0)) {
                throw ConfigError("basis: spatial range of dimension " + std::to_string(i + 1) +
                                  " must satisfy lo < hi");
            }
            for (double L : supports_) {
                if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("basis: supports must be positive");
                // Adjacent components must overlap.
                if (!(static_cast<double>(ns_) > r.width() / L)) {
                    throw ConfigError("basis: overlap rule violated in dimension " +
                                      std::to_string(i + 1) + ": ns=" + std::to_string(ns_) +
                                      " must exceed range/support=" + format_double(r.width() / L));
                }
            }
        }
    }

    std::vector<Interval> spatial_ranges_;
    int ns_;
    std::vector<double> supports_;
    double r_t_;
    int nt_;
};

/// The ns components of one spatial dimension at one scale.
inline Vector spatial_basis_1d(double s, int dim, double support, const BasisConfig& cfg) {
    Vector out(cfg.ns());
    for (int c = 0; c < cfg.ns(); ++c) {
        // Shift so that the uniform center x_c sits at c * L / 4.
        const double shifted = s - cfg.center(dim, c) + static_cast<double>(c) * support / 4.0;
        out[c] = spline_component(shifted, c, support);
    }
    return out;
}

namespace detail {

inline void check_spatial(std::span<const double> s, const BasisConfig& cfg) {
    if (s.size() != static_cast<std::size_t>(cfg.d())) {
        throw DomainError("spatial point has " + std::to_string(s.size()) +
                          " coordinates, basis expects " + std::to_string(cfg.d()));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& r = cfg.spatial_ranges()[i];
        if (!std::isfinite(s[i]) || !r.contains(s[i])) {
            throw DomainError("spatial coordinate " + format_double(s[i]) + " in dimension " +
                              std::to_string(i + 1) + " outside [" + format_double(r.lo) + ", " +
                              format_double(r.hi) + "]");
        }
    }
}

// Kronecker product a (x) b, a most significant.
inline Vector kron(const Vector& a, const Vector& b) {
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
    return out;
}

}  // namespace detail

/// phi_1(s_1) (x) ... (x) phi_d(s_d), stacked per scale in declared order.
inline Vector spatial_basis(std::span<const double> s, const BasisConfig& cfg) {
    detail::check_spatial(s, cfg);
    Vector out(static_cast<Eigen::Index>(cfg.spatial_size()));
    Eigen::Index offset = 0;
    for (double L : cfg.supports()) {
        Vector block = spatial_basis_1d(s[0], 0, L, cfg);
        for (int i = 1; i < cfg.d(); ++i) {
            block = detail::kron(block, spatial_basis_1d(s[static_cast<std::size_t>(i)], i, L, cfg));
        }
        out.segment(offset, block.size()) = block;
        offset += block.size();
    }
    return out;
}

/// sin(pi x) with exact reduction of x modulo 2, so integer x gives exact
/// zeros (std::sin(k * pi) leaves O(1e-16) residue).
inline double sin_pi(double x) {
    double r = std::fmod(x, 2.0);  // exact
    if (r < 0.0) r += 2.0;
    if (r == 0.0 || r == 1.0) return 0.0;
    if (r == 0.5) return 1.0;
    if (r == 1.5) return -1.0;
    const double sign = r > 1.0 ? -1.0 : 1.0;
    if (r > 1.0) r -= 1.0;
    if (r > 0.5) r = 1.0 - r;
    return sign * std::sin(std::numbers::pi * r);
}

/// psi_0 = 1, psi_k(t) = sin(k pi (t + R_t) / (2 R_t)) / sqrt(R_t).
inline Vector temporal_basis(double t, const BasisConfig& cfg) {
    const double rt = cfg.r_t();
    if (!std::isfinite(t) || t < 0.0 || t > rt) {
        throw DomainError("time " + format_double(t) + " outside [0, " + format_double(rt) + "]");
    }
    Vector out(static_cast<Eigen::Index>(cfg.temporal_size()));
    out[0] = 1.0;
    const double scale = 1.0 / std::sqrt(rt);
    const double half_turns = (t + rt) / (2.0 * rt);
    for (int k = 1; k <= cfg.nt(); ++k) out[k] = scale * sin_pi(static_cast<double>(k) * half_turns);
    return out;
}

/// phi(s, t) = psi(t) (x) phi(s); temporal-major ordering.
inline Vector phi(const SpaceTimePoint& pt, const BasisConfig& cfg) {
    const Vector spatial = spatial_basis(pt.s, cfg);
    const Vector temporal = temporal_basis(pt.t, cfg);
    return detail::kron(temporal, spatial);
}

/// col{1, phi(s, t)}.
inline Vector alpha(const SpaceTimePoint& pt, const BasisConfig& cfg) {
    const Vector spatial = spatial_basis(pt.s, cfg);
    const Vector temporal = temporal_basis(pt.t, cfg);
    const auto ns = spatial.size();
    Vector out(1 + temporal.size() * ns);
    out[0] = 1.0;
    for (Eigen::Index k = 0; k < temporal.size(); ++k) out.segment(1 + k * ns, ns) = temporal[k] * spatial;
    return out;
}

}  // namespace stkg
