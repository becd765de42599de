#include <cmath>

#include <gtest/gtest.h>

#include "stkg/covariance_model.hpp"
#include "support/generators.hpp"

using namespace stkg;
using stkg::testing::random_params;
using stkg::testing::random_points;

namespace {

BasisConfig small_basis() { return BasisConfig({{0.0, 10.0}}, 6, {4.0}, 5.0, 3); }

}  // namespace

TEST(CovFunction, ZeroParamsGiveZero) {
    const auto cfg = small_basis();
    const CovarianceParams zero{0.0, Vector::Zero(static_cast<Eigen::Index>(cfg.p()))};
    EXPECT_EQ(cov_function({{1.0}, 2.0}, {{3.0}, 1.0}, zero, cfg), 0.0);
}

TEST(CovFunction, NuggetOnlyAtIdenticalPoints) {
    const auto cfg = small_basis();
    const CovarianceParams nugget{0.09, Vector::Zero(static_cast<Eigen::Index>(cfg.p()))};
    EXPECT_EQ(cov_function({{1.0}, 2.0}, {{1.0}, 2.0}, nugget, cfg), 0.09);
    EXPECT_EQ(cov_function({{1.0}, 2.0}, {{1.0}, 2.5}, nugget, cfg), 0.0);
}

TEST(CovFunction, DisjointSupportsGiveZero) {
    // Single component per side: with L = 1 on [0, 10] and 15 components,
    // points more than L apart share no component.
    const BasisConfig cfg({{0.0, 10.0}}, 15, {1.0}, 5.0, 2);
    const CovarianceParams params{0.0, Vector::Ones(static_cast<Eigen::Index>(cfg.p()))};
    EXPECT_EQ(cov_function({{2.0}, 1.0}, {{3.0}, 4.0}, params, cfg), 0.0);
    EXPECT_EQ(cov_function({{2.0}, 1.0}, {{7.5}, 1.0}, params, cfg), 0.0);
}

TEST(CovFunction, SymmetricAndDimensionChecked) {
    const auto cfg = small_basis();
    Rng rng(4);
    const auto params = random_params(rng, static_cast<Eigen::Index>(cfg.p()));
    const auto pts = random_points(rng, cfg, 20);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double ab = cov_function(pts[i], pts[i + 1], params, cfg);
        EXPECT_NEAR(ab, cov_function(pts[i + 1], pts[i], params, cfg), 1e-14 * std::max(1.0, std::abs(ab)));
    }
    const CovarianceParams wrong{1.0, Vector::Ones(3)};
    EXPECT_THROW((void)cov_function(pts[0], pts[1], wrong, cfg), ConfigError);
}

TEST(CovMap, SelfEntryIncludesNugget) {
    const auto cfg = small_basis();
    Rng rng(8);
    const auto params = random_params(rng, static_cast<Eigen::Index>(cfg.p()));
    auto grid = random_points(rng, cfg, 10);
    const auto test = grid[4];
    const Vector map = cov_map(test, grid, params, cfg);
    const Vector ph = phi(test, cfg);
    EXPECT_NEAR(map[4], ph.dot(params.theta.cwiseProduct(ph)) + params.theta0, 1e-12);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(map[static_cast<Eigen::Index>(i)], cov_function(test, grid[i], params, cfg), 1e-12);
    }
}

TEST(CovMap, ConstantHarmonicGivesTimeInvariantMap) {
    const auto cfg = small_basis();
    CovarianceParams params{0.0, Vector::Zero(static_cast<Eigen::Index>(cfg.p()))};
    params.theta.head(static_cast<Eigen::Index>(cfg.spatial_size())).setOnes();
    const SpaceTimePoint test{{4.0}, 2.0};
    std::vector<SpaceTimePoint> column;
    for (int k = 0; k <= 20; ++k) column.push_back({{6.0}, 5.0 * k / 20.0});
    const Vector map = cov_map(test, column, params, cfg);
    for (Eigen::Index i = 1; i < map.size(); ++i) EXPECT_NEAR(map[i], map[0], 1e-14);
}

TEST(CovMap, SingleHarmonicIsPeriodic) {
    const BasisConfig cfg({{0.0, 10.0}}, 6, {4.0}, 20.0, 8);
    const int k = 8;  // period 4 R_t / k = 10
    const auto block = static_cast<Eigen::Index>(cfg.spatial_size());
    CovarianceParams params{0.0, Vector::Zero(static_cast<Eigen::Index>(cfg.p()))};
    params.theta.segment(k * block, block).setOnes();
    const SpaceTimePoint test{{5.0}, 3.0};
    for (double t : {0.5, 1.7, 4.2, 7.9}) {
        const double a = cov_map(test, {{{5.0}, t}}, params, cfg)[0];
        const double b = cov_map(test, {{{5.0}, t + 10.0}}, params, cfg)[0];
        EXPECT_NEAR(a, b, 1e-12);
    }
}

TEST(ModelCovMatrix, IdentityAndScalarCases) {
    const Matrix Phi = Matrix::Random(5, 4);
    EXPECT_TRUE(model_cov_matrix(Phi, {1.0, Vector::Zero(4)}).isIdentity(0.0));
    const Matrix one = Matrix::Random(1, 4);
    const CovarianceParams params{0.5, Vector::Constant(4, 2.0)};
    const Matrix K = model_cov_matrix(one, params);
    ASSERT_EQ(K.rows(), 1);
    EXPECT_NEAR(K(0, 0), 2.0 * one.squaredNorm() + 0.5, 1e-12);
    EXPECT_THROW((void)model_cov_matrix(Phi, {0.0, Vector::Ones(4)}), ConfigError);
}

TEST(ModelCovMatrix, SymmetricWithEigenvaluesAboveNugget) {
    Rng rng(21);
    const auto cfg = small_basis();
    for (int trial = 0; trial < 10; ++trial) {
        const auto pts = random_points(rng, cfg, 25);
        const Matrix Phi = regressor_matrix(pts, cfg);
        const auto params = random_params(rng, Phi.cols());
        const Matrix K = model_cov_matrix(Phi, params);
        EXPECT_LE((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
        EXPECT_GE(eig.eigenvalues().minCoeff(), params.theta0 - 1e-10);
        for (std::size_t i = 0; i < pts.size(); i += 6) {
            for (std::size_t j = 0; j < pts.size(); j += 5) {
                const double expected = cov_function(pts[i], pts[j], params, cfg);
                EXPECT_NEAR(K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), expected, 1e-12);
            }
        }
    }
}

TEST(RegressorMatrix, RowsReproducePhi) {
    Rng rng(2);
    const auto cfg = small_basis();
    const auto pts = random_points(rng, cfg, 7);
    const Matrix Phi = regressor_matrix(pts, cfg);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(Phi.row(static_cast<Eigen::Index>(i)).transpose(), phi(pts[i], cfg));
}

TEST(LambdaWeights, PureNoiseModelGivesSampleMean) {
    const Matrix Phi = Matrix::Random(9, 5);
    const Vector lambda = lambda_weights(Vector::Random(5), Phi, {0.7, Vector::Zero(5)});
    for (Eigen::Index i = 0; i < lambda.size(); ++i) EXPECT_NEAR(lambda[i], 1.0 / 9.0, 1e-14);
}

TEST(LambdaWeights, SumToOneAndScaleInvariant) {
    Rng rng(13);
    const auto cfg = small_basis();
    for (int trial = 0; trial < 20; ++trial) {
        const auto pts = random_points(rng, cfg, 5 + rng.below(30));
        const Matrix Phi = regressor_matrix(pts, cfg);
        const auto params = random_params(rng, Phi.cols());
        const SpaceTimePoint test = random_points(rng, cfg, 1)[0];
        const Vector lambda = lambda_weights(test, Phi, params, cfg);
        EXPECT_NEAR(lambda.sum(), 1.0, 1e-10);
        for (double c : {0.1, 10.0}) {
            const Vector scaled = lambda_weights(test, Phi, params.scaled(c), cfg);
            EXPECT_LE((scaled - lambda).cwiseAbs().maxCoeff(), 1e-10);
        }
        // Shift invariance: y + c 1 moves the prediction by exactly c.
        const Vector y = Vector::Random(Phi.rows());
        const Vector shifted = y.array() + 3.25;
        EXPECT_NEAR(lambda.dot(shifted) - lambda.dot(y), 3.25, 1e-10);
    }
}

TEST(LambdaWeights, RejectsSingularModel) {
    const Matrix Phi = Matrix::Random(4, 3);
    EXPECT_THROW((void)lambda_weights(Vector::Random(3), Phi, {0.0, Vector::Ones(3)}), ConfigError);
}

TEST(ThetaFromWeights, ZeroWeightsAndInterpolation) {
    const Matrix Phi = Matrix::Random(6, 3);
    const Vector y = Vector::Random(6);
    const auto at_zero = theta_from_weights(Vector::Zero(4), Phi, y);
    EXPECT_NEAR(at_zero.theta0, y.norm() / std::sqrt(6.0), 1e-14);
    EXPECT_TRUE(at_zero.theta.isZero(0.0));

    Vector w(4);
    w << 0.5, 1.0, -2.0, 0.0;
    const Vector exact = Vector::Constant(6, 0.5) + Phi * w.tail(3);
    const auto interp = theta_from_weights(w, Phi, exact);
    EXPECT_NEAR(interp.theta0, 0.0, 1e-14);
    EXPECT_NEAR(interp.theta[0], 1.0 / Phi.col(0).norm(), 1e-14);
    EXPECT_NEAR(interp.theta[1], 2.0 / Phi.col(1).norm(), 1e-14);
    EXPECT_EQ(interp.theta[2], 0.0);
}

TEST(ThetaFromWeights, NonzeroWeightOnZeroColumnIsError) {
    Matrix Phi = Matrix::Random(5, 3);
    Phi.col(1).setZero();
    Vector w = Vector::Zero(4);
    EXPECT_NO_THROW((void)theta_from_weights(w, Phi, Vector::Random(5)));
    w[2] = 0.1;
    EXPECT_THROW((void)theta_from_weights(w, Phi, Vector::Random(5)), NumericError);
}
