#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "ebfkit/errors.hpp"

namespace ebfkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// (A + A^T) / 2. Tolerates round-off asymmetry from text round trips.
inline Matrix symmetrize(const Eigen::Ref<const Matrix>& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected square");
  }
  return 0.5 * (a + a.transpose());
}

/// Cholesky factorisation of the symmetrised input. Throws on failure.
inline Eigen::LLT<Matrix> cholesky(const Eigen::Ref<const Matrix>& a,
                                   const std::string& context = "matrix") {
  if (a.size() == 0) throw DimensionMismatch(context + " is empty");
  if (!a.allFinite()) throw NotPositiveDefinite(context + " has non-finite entries");
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(context + " failed Cholesky factorisation");
  }
  // LLT succeeds on some semi-definite inputs with exactly zero pivots.
  const auto diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
    throw NotPositiveDefinite(context + " has a non-positive Cholesky pivot");
  }
  return llt;
}

inline double log_det_from_cholesky(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// log|A| for symmetric positive-definite A via dense Cholesky.
inline double log_det_spd(const Eigen::Ref<const Matrix>& a,
                          const std::string& context = "matrix") {
  return log_det_from_cholesky(cholesky(a, context));
}

/// v^T cov^{-1} v through a triangular solve against the Cholesky factor.
inline double quadratic_form(const Eigen::Ref<const Matrix>& cov,
                             const Eigen::Ref<const Vector>& v) {
  if (cov.rows() != v.size()) {
    throw DimensionMismatch("covariance is " + std::to_string(cov.rows()) +
                            "-dimensional but vector has length " +
                            std::to_string(v.size()));
  }
  const auto llt = cholesky(cov, "covariance");
  const Vector w = llt.matrixL().solve(v);
  return w.squaredNorm();
}

/// Returns cov + ridge * I when that factorises; the ridge regularises
/// sample covariances of high-dimensional blocks.
inline Matrix validate_pd(const Eigen::Ref<const Matrix>& cov, double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw InvalidArgument("ridge must be finite and nonnegative");
  }
  Matrix out = symmetrize(cov);
  out.diagonal().array() += ridge;
  cholesky(out, "covariance (ridge " + std::to_string(ridge) + ")");
  return out;
}

}  // namespace ebfkit
