#pragma once

// Model class: constant mean and covariance
//   Cov[y, y'] = phi(s,t)^T Theta phi(s',t') + theta0 * delta,
// with the closed-form linear predictor weights for a fixed parameter.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "stkg/basis.hpp"
#include "stkg/error.hpp"

namespace stkg {

struct CovarianceParams {
    double theta0 = 0.0;
    Vector theta;  ///< Diagonal of Theta, length p.

    void validate() const {
        if (!std::isfinite(theta0) || theta0 < 0.0) throw ConfigError("theta0 must be finite and >= 0");
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            if (!std::isfinite(theta[j]) || theta[j] < 0.0) {
                throw ConfigError("theta[" + std::to_string(j) + "] must be finite and >= 0");
            }
        }
    }

    [[nodiscard]] CovarianceParams scaled(double c) const { return {c * theta0, c * theta}; }
};

/// Mean coefficient for u(s, t) = 1. Predictions do not depend on it.
struct MeanParams {
    double eta = 0.0;
};

/// Regressor matrix Phi: row i is phi(s_i, t_i)^T.
inline Matrix regressor_matrix(const std::vector<SpaceTimePoint>& points, const BasisConfig& cfg) {
    Matrix Phi(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(cfg.p()));
    for (std::size_t i = 0; i < points.size(); ++i) Phi.row(static_cast<Eigen::Index>(i)) = phi(points[i], cfg).transpose();
    return Phi;
}

namespace detail {

inline void check_params(const CovarianceParams& params, Eigen::Index p) {
    params.validate();
    if (params.theta.size() != p) {
        throw ConfigError("covariance params have " + std::to_string(params.theta.size()) +
                          " entries, basis dimension is " + std::to_string(p));
    }
}

inline Eigen::LLT<Matrix> factor(const Matrix& K) {
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization of K_theta failed");
    return llt;
}

// Scalar Moore-Penrose inverse.
inline double pinv(double x) { return std::abs(x) > 1e-12 ? 1.0 / x : 0.0; }

}  // namespace detail

inline double cov_function(const SpaceTimePoint& a, const SpaceTimePoint& b,
                           const CovarianceParams& params, const BasisConfig& cfg) {
    detail::check_params(params, static_cast<Eigen::Index>(cfg.p()));
    const Vector pa = phi(a, cfg);
    const Vector pb = phi(b, cfg);
    const double nugget = (a == b) ? params.theta0 : 0.0;
    return pa.dot(params.theta.cwiseProduct(pb)) + nugget;
}

/// Covariance of `test` against every point of `grid`.
inline Vector cov_map(const SpaceTimePoint& test, const std::vector<SpaceTimePoint>& grid,
                      const CovarianceParams& params, const BasisConfig& cfg) {
    detail::check_params(params, static_cast<Eigen::Index>(cfg.p()));
    const Vector weighted = params.theta.cwiseProduct(phi(test, cfg));
    Vector out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] =
            phi(grid[i], cfg).dot(weighted) + (grid[i] == test ? params.theta0 : 0.0);
    }
    return out;
}

/// K_theta = Phi Theta Phi^T + theta0 I.
inline Matrix model_cov_matrix(const Matrix& Phi, const CovarianceParams& params) {
    detail::check_params(params, Phi.cols());
    if (!(params.theta0 > 0.0)) throw ConfigError("model_cov_matrix requires theta0 > 0");
    Matrix K = Phi * params.theta.asDiagonal() * Phi.transpose();
    K.diagonal().array() += params.theta0;
    return K;
}

/// Optimal linear predictor weights lambda_theta(s, t) for the training
/// regressors Phi: y_hat = lambda^T y.
inline Vector lambda_weights(const Vector& test_phi, const Matrix& Phi, const CovarianceParams& params) {
    if (Phi.rows() < 1) throw ConfigError("lambda_weights requires at least one training point");
    if (test_phi.size() != Phi.cols()) throw ConfigError("lambda_weights: test regressor dimension mismatch");
    const Matrix K = model_cov_matrix(Phi, params);
    const auto llt = detail::factor(K);
    const Vector ones = Vector::Ones(Phi.rows());
    const Vector k_inv_one = llt.solve(ones);
    const double gain = detail::pinv(ones.dot(k_inv_one));
    const Vector b = Phi * params.theta.cwiseProduct(test_phi);
    // Oblique projection of b onto span(1)^perp.
    const Vector b_perp = b - ones * (gain * k_inv_one.dot(b));
    return k_inv_one * gain + llt.solve(b_perp);
}

inline Vector lambda_weights(const SpaceTimePoint& test, const Matrix& Phi, const CovarianceParams& params,
                             const BasisConfig& cfg) {
    return lambda_weights(phi(test, cfg), Phi, params);
}

/// Parameters minimizing the augmented fit for a fixed weight vector
/// w = col{eta, v}: theta0 = ||y - [1 Phi] w|| / sqrt(n),
/// theta_k = |w_{k+1}| / ||Phi column k||.
inline CovarianceParams theta_from_weights(const Vector& w, const Matrix& Phi, const Vector& y) {
    const auto n = Phi.rows();
    const auto p = Phi.cols();
    if (n < 1) throw ConfigError("theta_from_weights requires n >= 1");
    if (w.size() != p + 1 || y.size() != n) throw ConfigError("theta_from_weights: dimension mismatch");
    const Vector residual = y - Vector::Constant(n, w[0]) - Phi * w.tail(p);
    CovarianceParams out;
    out.theta0 = residual.norm() / std::sqrt(static_cast<double>(n));
    out.theta = Vector::Zero(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const double col_norm = Phi.col(k).norm();
        const double wk = w[k + 1];
        if (col_norm == 0.0) {
            if (wk != 0.0) {
                throw NumericError("nonzero weight on identically-zero regressor column " + std::to_string(k));
            }
            continue;
        }
        out.theta[k] = std::abs(wk) / col_norm;
    }
    return out;
}

}  // namespace stkg
