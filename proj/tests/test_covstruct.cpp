#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ebfkit/covstruct.hpp"
#include "ebfkit/linalg.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace ebfkit;

namespace {

Matrix car_example_weights() {
  Matrix w(2, 2);
  w << 0.0, 0.5, 0.5, 0.0;
  return w;
}

}  // namespace

TEST(BuildCovariance, DiagonalPlacesVariances) {
  const auto s = CovarianceStructure::diagonal({"a", "b"});
  const Matrix psi = build_covariance(s, {{"a", 4.0}, {"b", 9.0}});
  Matrix expected(2, 2);
  expected << 4, 0, 0, 9;
  EXPECT_EQ(psi, expected);
}

TEST(BuildCovariance, BlockKroneckerIsBlockTimesIdentity) {
  const auto s = CovarianceStructure::block_kronecker(2, 2);
  const Matrix psi = build_covariance(s, {{"s_1_1", 1.0}, {"s_1_2", 0.3}, {"s_2_2", 1.0}});
  Matrix expected(4, 4);
  // All copies of effect 1, then all copies of effect 2.
  expected << 1.0, 0.0, 0.3, 0.0,  //
      0.0, 1.0, 0.0, 0.3,          //
      0.3, 0.0, 1.0, 0.0,          //
      0.0, 0.3, 0.0, 1.0;
  EXPECT_EQ(psi, expected);
}

TEST(BuildCovariance, CarMatchesHandComputation) {
  // (I - W)^{-1} = (4/3) [[1, 1/2], [1/2, 1]], squared gives [[20, 16], [16, 20]] / 9.
  const auto s = CovarianceStructure::car(car_example_weights(), Vector::Ones(2));
  const Matrix psi = build_covariance(s, {{"variance", 1.0}});
  EXPECT_NEAR(psi(0, 0), 20.0 / 9.0, 1e-14);
  EXPECT_NEAR(psi(0, 1), 16.0 / 9.0, 1e-14);
  EXPECT_NEAR(psi(1, 0), 16.0 / 9.0, 1e-14);
  EXPECT_NEAR(psi(1, 1), 20.0 / 9.0, 1e-14);
}

TEST(BuildCovariance, MissingSlotIsReported) {
  const auto s = CovarianceStructure::diagonal({"a", "b"});
  EXPECT_THROW(build_covariance(s, {{"a", 1.0}}), MissingSlot);
}

TEST(BuildCovariance, NonPositiveVarianceIsNotPositiveDefinite) {
  EXPECT_THROW(build_covariance(CovarianceStructure::scaled_identity(2), {{"variance", 0.0}}), NotPositiveDefinite);
  const auto s = CovarianceStructure::dense_symmetric(2);
  EXPECT_THROW(build_covariance(s, {{"s_1_1", 1.0}, {"s_1_2", 2.0}, {"s_2_2", 1.0}}), NotPositiveDefinite);
}

TEST(BuildCovariance, RowNormalisedCarIsSingular) {
  // Intrinsic CAR on a connected pair: rows of W sum to one.
  Matrix w(2, 2);
  w << 0.0, 1.0, 1.0, 0.0;
  const auto s = CovarianceStructure::car(w, Vector::Ones(2));
  EXPECT_THROW(build_covariance(s, {{"variance", 1.0}}), SingularSystem);
  EXPECT_THROW(log_det(s, {{"variance", 1.0}}), SingularSystem);
}

TEST(CovarianceStructure, RejectsInvalidDeclarations) {
  EXPECT_THROW(CovarianceStructure::scaled_identity(0), InvalidArgument);
  EXPECT_THROW(CovarianceStructure::diagonal({"a", "a"}), InvalidArgument);
  EXPECT_THROW(CovarianceStructure::diagonal(3, {{"a", 0, 2}}), InvalidArgument);
  EXPECT_THROW(CovarianceStructure::diagonal(3, {{"a", 0, 2}, {"b", 1, 3}}), InvalidArgument);
  EXPECT_THROW(CovarianceStructure::dense_symmetric(2, {"x", "y"}), InvalidArgument);
  Matrix w = car_example_weights();
  w(0, 0) = 0.1;
  EXPECT_THROW(CovarianceStructure::car(w, Vector::Ones(2)), InvalidArgument);
  EXPECT_THROW(CovarianceStructure::car(car_example_weights(), Vector::Constant(2, -1.0)), InvalidArgument);
  w = car_example_weights();
  w(0, 1) = std::nan("");
  EXPECT_THROW(CovarianceStructure::car(w, Vector::Ones(2)), InvalidArgument);
}

TEST(LogDet, ClosedForms) {
  EXPECT_NEAR(log_det(CovarianceStructure::diagonal({"a", "b"}), {{"a", 4.0}, {"b", 9.0}}), std::log(36.0), 1e-14);
  EXPECT_EQ(log_det(CovarianceStructure::scaled_identity(3), {{"variance", 1.0}}), 0.0);
  const auto car = CovarianceStructure::car(car_example_weights(), Vector::Ones(2));
  EXPECT_NEAR(log_det(car, {{"variance", 1.0}}), std::log(16.0 / 9.0), 1e-14);
}

TEST(LogDet, BroadcastDiagonalCountsEachIndex) {
  const auto s = CovarianceStructure::diagonal(5, {{"a", 0, 3}, {"b", 3, 5}});
  EXPECT_NEAR(log_det(s, {{"a", 2.0}, {"b", 3.0}}), 3 * std::log(2.0) + 2 * std::log(3.0), 1e-14);
}

TEST(QuadraticForm, Examples) {
  EXPECT_NEAR(quadratic_form(Matrix::Identity(2, 2), Vector::Map(std::array{3.0, 4.0}.data(), 2)), 25.0, 1e-13);
  Matrix d(2, 2);
  d << 4, 0, 0, 1;
  EXPECT_NEAR(quadratic_form(d, Vector::Map(std::array{2.0, 0.0}.data(), 2)), 1.0, 1e-14);
  Matrix c(2, 2);
  c << 2, 1, 1, 2;
  EXPECT_NEAR(quadratic_form(c, Vector::Ones(2)), 2.0 / 3.0, 1e-14);
  EXPECT_EQ(quadratic_form(c, Vector::Zero(2)), 0.0);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_THROW(quadratic_form(bad, Vector::Ones(2)), NotPositiveDefinite);
}

TEST(ValidatePd, RidgeBehaviour) {
  EXPECT_EQ(validate_pd(Matrix::Identity(2, 2), 0.0), Matrix::Identity(2, 2));
  const Matrix ones = Matrix::Ones(2, 2);
  EXPECT_THROW(validate_pd(ones, 0.0), NotPositiveDefinite);
  const Matrix fixed = validate_pd(ones, 1e-6);
  EXPECT_DOUBLE_EQ(fixed(0, 0), 1.0 + 1e-6);
  EXPECT_DOUBLE_EQ(fixed(0, 1), 1.0);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(validate_pd(indefinite, 0.0), NotPositiveDefinite);
  EXPECT_THROW(validate_pd(Matrix::Identity(2, 2), -1.0), InvalidArgument);
}

TEST(ValidatePd, SymmetrisesRoundTripNoise) {
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = 0.5 + 1e-15;
  a(1, 0) = 0.5;
  const Matrix out = validate_pd(a, 0.0);
  EXPECT_EQ(out(0, 1), out(1, 0));
}

// 200 random admissible parameter draws per kind: closed-form log-det agrees
// with the dense Cholesky value of the built matrix.
TEST(LogDetProperty, FastPathMatchesDenseCholesky) {
  std::mt19937_64 gen(11);
  for (auto kind : testgen::kAllKinds) {
    for (int rep = 0; rep < 200; ++rep) {
      const auto c = testgen::random_case(kind, gen);
      const Matrix psi = build_covariance(c.structure, c.params);
      ASSERT_EQ(psi, psi.transpose());
      const double dense = log_det_spd(psi);
      EXPECT_LT(std::abs(log_det(c.structure, c.params) - dense), 1e-8) << to_string(kind);
      EXPECT_LT(std::abs(oracle::log_det_eigen(psi) - dense), 1e-8) << to_string(kind);
    }
  }
}

TEST(CarProperty, ZeroWeightsReduceToDiagonal) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto n = static_cast<Eigen::Index>(testgen::uniform_int(gen, 1, 7));
    Vector b(n);
    for (Eigen::Index j = 0; j < n; ++j) b(j) = testgen::log_uniform(gen, 0.1, 2.0);
    const double tau2 = testgen::log_uniform(gen, 0.1, 5.0);
    const auto car = CovarianceStructure::car(Matrix::Zero(n, n), b);
    const Matrix expected = (tau2 * b).asDiagonal();
    EXPECT_LT((build_covariance(car, {{"variance", tau2}}) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BlockKroneckerProperty, MatchesKroneckerProductOracle) {
  std::mt19937_64 gen(5);
  for (Eigen::Index p = 1; p <= 3; ++p) {
    for (Eigen::Index m = 1; m <= 5; ++m) {
      const auto s = CovarianceStructure::block_kronecker(static_cast<std::size_t>(p), static_cast<std::size_t>(m));
      const Matrix block = oracle::random_spd(p, gen);
      const auto params = testgen::block_params(s, block);
      const Matrix dense = oracle::kron_identity(block, m);
      EXPECT_LT((build_covariance(s, params) - dense).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_NEAR(log_det(s, params), static_cast<double>(m) * oracle::log_det_eigen(block), 1e-10);
      EXPECT_NEAR(log_det(s, params), oracle::log_det_eigen(dense), 1e-10);
    }
  }
}
