#pragma once

// Streaming learner for the square-root weighted-l1 regression
//
//   w* = argmin_w  sqrt( (1/n) sum_i (y_i - alpha_i^T w)^2 )
//                + (1/n) sum_{j>1} sqrt(Gamma_jj) |w_j|
//
// whose predictor alpha(s,t)^T w* coincides with the covariance-fitted
// linear predictor. Only the Gram quantities Gamma = sum alpha alpha^T,
// rho = sum alpha y and kappa = sum y^2 are kept, so each observation costs
// O(p^2) time and the state is O(p^2) memory regardless of n.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stkg/basis.hpp"
#include "stkg/error.hpp"

namespace stkg {

struct SolverConfig {
    int sweeps_per_sample = 1;       ///< Coordinate sweeps after each observation.
    double convergence_tol = 1e-9;   ///< Relative fit change that ends run_to_convergence.
    bool clamp_negative_radicand = true;
    int max_sweeps = 10000;          ///< Cap for run_to_convergence.

    void validate() const {
        if (sweeps_per_sample < 1) throw ConfigError("sweeps_per_sample must be >= 1");
        if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be >= 0");
        if (max_sweeps < 1) throw ConfigError("max_sweeps must be >= 1");
    }
};

/// Everything the learner remembers. Only the upper triangle of `gamma` is
/// maintained; use gamma_symmetric() for the full matrix.
struct SolverState {
    std::uint64_t n = 0;
    Matrix gamma;
    Vector rho;
    double kappa = 0.0;
    Vector w_check;

    SolverState() = default;
    explicit SolverState(std::size_t dim)
        : gamma(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
          rho(Vector::Zero(static_cast<Eigen::Index>(dim))),
          w_check(Vector::Zero(static_cast<Eigen::Index>(dim))) {}

    [[nodiscard]] Eigen::Index dim() const { return rho.size(); }

    [[nodiscard]] Matrix gamma_symmetric() const {
        Matrix full = gamma.triangularView<Eigen::Upper>();
        full.triangularView<Eigen::StrictlyLower>() = gamma.transpose().triangularView<Eigen::StrictlyLower>();
        return full;
    }

    /// Bytes held by the state's buffers.
    [[nodiscard]] std::size_t memory_bytes() const {
        return sizeof(SolverState) +
               sizeof(double) * static_cast<std::size_t>(gamma.size() + rho.size() + w_check.size());
    }

    friend bool operator==(const SolverState& a, const SolverState& b) {
        return a.n == b.n && a.kappa == b.kappa && a.rho == b.rho && a.w_check == b.w_check &&
               a.gamma.triangularView<Eigen::Upper>().toDenseMatrix() ==
                   b.gamma.triangularView<Eigen::Upper>().toDenseMatrix();
    }
};

/// All-zero state sized p + 1 for the given basis.
inline SolverState init(const BasisConfig& cfg) { return SolverState(cfg.p() + 1); }

/// Rank-one Gram update with one regressor alpha and response y.
inline void absorb(SolverState& state, const Vector& a, double y) {
    if (a.size() != state.dim()) throw ConfigError("regressor dimension does not match solver state");
    if (!std::isfinite(y) || !a.allFinite()) throw NumericError("non-finite observation");
    state.gamma.selfadjointView<Eigen::Upper>().rankUpdate(a);
    state.rho.noalias() += y * a;
    state.kappa += y * y;
    ++state.n;
}

namespace detail {

// tau += delta * Gamma[:, j] reading the upper triangle only.
inline void add_gamma_column(const Matrix& gamma, Eigen::Index j, double delta, Vector& tau) {
    const auto m = gamma.rows();
    tau.head(j + 1).noalias() += delta * gamma.col(j).head(j + 1);
    if (j + 1 < m) tau.tail(m - j - 1).noalias() += delta * gamma.row(j).tail(m - j - 1).transpose();
}

}  // namespace detail

inline constexpr double kCorrelationRoundoff = 64.0 * std::numeric_limits<double>::epsilon();

/// `count` cyclic coordinate sweeps over j = 1..p+1 starting from w_check.
/// The residual energy epsilon and correlation vector tau are formed once
/// and then maintained incrementally as each coordinate is committed.
inline void coordinate_sweeps(SolverState& state, int count, const SolverConfig& cfg) {
    if (state.n == 0) return;
    const auto m = state.dim();
    const double n = static_cast<double>(state.n);
    const double nm1 = n - 1.0;
    Vector& w = state.w_check;

    const Vector gw = state.gamma.selfadjointView<Eigen::Upper>() * w;
    double eps = state.kappa + w.dot(gw) - 2.0 * w.dot(state.rho);
    Vector tau = state.rho - gw;

    for (int sweep = 0; sweep < count; ++sweep) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double g = state.gamma(j, j);
            if (!(g > 0.0)) continue;
            const double w_old = w[j];
            double c = tau[j] + g * w_old;
            // Correlation at rounding level of its bound sqrt(g kappa) is zero.
            if (j > 0 && std::abs(c) <= kCorrelationRoundoff * std::sqrt(g * state.kappa)) c = 0.0;
            double w_new = 0.0;
            if (j == 0) {
                w_new = c / g;
            } else if (state.n >= 2) {
                const double a = eps + g * w_old * w_old + 2.0 * w_old * tau[j];
                double radicand = a * g - c * c;
                if (radicand < 0.0) {
                    if (!cfg.clamp_negative_radicand) throw NumericError("negative radicand in coordinate update");
                    radicand = 0.0;
                }
                const double root = std::sqrt(radicand);
                if (std::sqrt(nm1) * std::abs(c) > root) {
                    const double r_hat = std::abs(c) / g - std::sqrt(radicand / nm1) / g;
                    w_new = std::copysign(r_hat, c);
                }
            }
            const double delta = w_old - w_new;
            if (delta != 0.0) {
                eps += g * delta * delta + 2.0 * delta * tau[j];
                detail::add_gamma_column(state.gamma, j, delta, tau);
            }
            w[j] = w_new;
        }
    }
}

/// Absorbs one observation given its regressor alpha = col{1, phi}.
inline void update(SolverState& state, const Vector& a, double y, const SolverConfig& cfg) {
    absorb(state, a, y);
    coordinate_sweeps(state, cfg.sweeps_per_sample, cfg);
}

inline void update(SolverState& state, const SpaceTimePoint& pt, double y, const SolverConfig& scfg,
                   const BasisConfig& bcfg) {
    if (state.dim() != static_cast<Eigen::Index>(bcfg.p() + 1)) {
        throw ConfigError("solver state dimension does not match basis");
    }
    update(state, alpha(pt, bcfg), y, scfg);
}

/// Objective evaluated from the Gram quantities at weights w.
inline double objective(const SolverState& state, const Vector& w) {
    if (state.n == 0) throw ConfigError("objective undefined before any observation");
    const double n = static_cast<double>(state.n);
    const Vector gw = state.gamma.selfadjointView<Eigen::Upper>() * w;
    const double sq = state.kappa + w.dot(gw) - 2.0 * w.dot(state.rho);
    double penalty = 0.0;
    for (Eigen::Index j = 1; j < w.size(); ++j) penalty += std::sqrt(state.gamma(j, j)) * std::abs(w[j]);
    return std::sqrt(std::max(sq, 0.0) / n) + penalty / n;
}

inline double objective(const SolverState& state) { return objective(state, state.w_check); }

inline double predict(const SolverState& state, const Vector& a) {
    if (a.size() != state.dim()) throw ConfigError("regressor dimension does not match solver state");
    return a.dot(state.w_check);
}

inline double predict(const SolverState& state, const SpaceTimePoint& pt, const BasisConfig& bcfg) {
    return predict(state, alpha(pt, bcfg));
}

struct ConvergenceReport {
    int sweeps = 0;
    bool converged = false;  ///< False when the sweep cap was hit.
    double objective = 0.0;
};

/// Largest change in fitted values caused by moving from `before` to `after`,
/// measured per coordinate as sqrt(Gamma_jj / n) |dw_j|.
inline double scaled_step(const SolverState& state, const Vector& before, const Vector& after) {
    const double n = static_cast<double>(state.n);
    double step = 0.0;
    for (Eigen::Index j = 0; j < before.size(); ++j) {
        step = std::max(step, std::sqrt(std::max(state.gamma(j, j), 0.0) / n) * std::abs(after[j] - before[j]));
    }
    return step;
}

/// Further sweeps over the fixed Gram state until no coordinate moves the
/// fit by more than cfg.convergence_tol times the RMS response, or
/// cfg.max_sweeps is reached.
inline ConvergenceReport run_to_convergence(SolverState& state, const SolverConfig& cfg) {
    if (state.n == 0) throw ConfigError("run_to_convergence requires at least one observation");
    ConvergenceReport report;
    const double scale = std::max(std::sqrt(state.kappa / static_cast<double>(state.n)), 1e-300);
    while (report.sweeps < cfg.max_sweeps) {
        const Vector before = state.w_check;
        coordinate_sweeps(state, 1, cfg);
        ++report.sweeps;
        if (scaled_step(state, before, state.w_check) <= cfg.convergence_tol * scale) {
            report.converged = true;
            break;
        }
    }
    report.objective = objective(state);
    return report;
}

// Snapshot layout (little-endian):
//   "STKG" | u16 version | u32 dim (= p+1) | u64 n |
//   f64 kappa | f64 rho[dim] | f64 w[dim] | f64 Gamma upper triangle, row-major
inline constexpr std::array<char, 4> kSnapshotMagic{'S', 'T', 'K', 'G'};
inline constexpr std::uint16_t kSnapshotVersion = 1;

inline std::size_t snapshot_size(std::size_t dim) {
    return 4 + 2 + 4 + 8 + 8 * (1 + 2 * dim + dim * (dim + 1) / 2);
}

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<std::uint8_t, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.insert(out.end(), bytes.begin(), bytes.end());
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw FormatError("snapshot truncated");
    std::array<std::uint8_t, sizeof(T)> bytes;
    std::memcpy(bytes.data(), in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    pos += sizeof(T);
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace detail

inline std::vector<std::uint8_t> snapshot(const SolverState& state) {
    const auto dim = static_cast<std::size_t>(state.dim());
    std::vector<std::uint8_t> out;
    out.reserve(snapshot_size(dim));
    out.insert(out.end(), kSnapshotMagic.begin(), kSnapshotMagic.end());
    detail::put_le<std::uint16_t>(out, kSnapshotVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
    detail::put_le<std::uint64_t>(out, state.n);
    detail::put_le<double>(out, state.kappa);
    for (std::size_t j = 0; j < dim; ++j) detail::put_le<double>(out, state.rho[static_cast<Eigen::Index>(j)]);
    for (std::size_t j = 0; j < dim; ++j) detail::put_le<double>(out, state.w_check[static_cast<Eigen::Index>(j)]);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i; j < dim; ++j) {
            detail::put_le<double>(out, state.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
    }
    return out;
}

inline SolverState restore(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kSnapshotMagic.data(), 4) != 0) {
        throw FormatError("snapshot: bad magic bytes");
    }
    std::size_t pos = 4;
    const auto version = detail::get_le<std::uint16_t>(bytes, pos);
    if (version != kSnapshotVersion) {
        throw FormatError("snapshot: unsupported format version " + std::to_string(version));
    }
    const auto dim = detail::get_le<std::uint32_t>(bytes, pos);
    if (dim == 0) throw FormatError("snapshot: zero dimension");
    if (bytes.size() != snapshot_size(dim)) {
        throw FormatError("snapshot: expected " + std::to_string(snapshot_size(dim)) + " bytes, got " +
                          std::to_string(bytes.size()));
    }
    SolverState state(dim);
    state.n = detail::get_le<std::uint64_t>(bytes, pos);
    state.kappa = detail::get_le<double>(bytes, pos);
    for (std::uint32_t j = 0; j < dim; ++j) state.rho[j] = detail::get_le<double>(bytes, pos);
    for (std::uint32_t j = 0; j < dim; ++j) state.w_check[j] = detail::get_le<double>(bytes, pos);
    for (std::uint32_t i = 0; i < dim; ++i) {
        for (std::uint32_t j = i; j < dim; ++j) state.gamma(i, j) = detail::get_le<double>(bytes, pos);
    }
    return state;
}

}  // namespace stkg
