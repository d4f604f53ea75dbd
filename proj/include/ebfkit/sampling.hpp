#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "ebfkit/errors.hpp"
#include "ebfkit/linalg.hpp"

namespace ebfkit {

/// SplitMix64 finaliser; decorrelates structured seeds.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream identified by (master, index, purpose).
inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index, std::uint64_t purpose = 0) {
  return mix64(mix64(mix64(master) ^ index) ^ (purpose * 0xd1b54a32d192ed03ULL));
}

/// Random stream owned by one replication or one fit. Not thread-safe;
/// give each worker its own.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  /// Gamma(shape, rate = 1).
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }
  double chi_squared(double df) { return 2.0 * gamma(0.5 * df); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Draw from N(precision^{-1} b, precision^{-1}).
template <typename Mat, typename Vec>
Vec sample_normal_canonical(const Mat& precision, const Vec& b, Rng& rng) {
  Eigen::LLT<Mat> llt(precision);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("conditional precision is not positive definite");
  Vec z(b.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Vec mean = llt.solve(b);
  return mean + llt.matrixU().solve(z);
}

/// Inverse-Wishart(df, scale) draw with density proportional to
/// |X|^{-(df + p + 1)/2} exp(-tr(scale X^{-1}) / 2). Uses the Bartlett
/// factorisation of the Wishart(df, scale^{-1}) precision.
template <typename Mat>
Mat sample_inverse_wishart(double df, const Mat& scale, Rng& rng) {
  const auto p = scale.rows();
  if (!(df > static_cast<double>(p) - 1.0)) {
    throw DegenerateConditional("inverse-Wishart degrees of freedom " + std::to_string(df) +
                                " must exceed p - 1 = " + std::to_string(p - 1));
  }
  Eigen::LLT<Mat> scale_llt(scale);
  if (scale_llt.info() != Eigen::Success || !scale.allFinite()) {
    throw DegenerateConditional("inverse-Wishart scale matrix is not positive definite");
  }
  const Mat scale_inv = scale_llt.solve(Mat::Identity(p, p));
  Eigen::LLT<Mat> inv_llt(0.5 * (scale_inv + scale_inv.transpose()));
  const Mat l = inv_llt.matrixL();
  Mat a = Mat::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Mat la = l * a;
  const Mat wishart = la * la.transpose();
  Eigen::LLT<Mat> w_llt(wishart);
  if (w_llt.info() != Eigen::Success) throw DegenerateConditional("Wishart draw is singular");
  Mat out = w_llt.solve(Mat::Identity(p, p));
  return 0.5 * (out + out.transpose());
}

/// Inverse-gamma(shape, rate): 1/X with X ~ Gamma(shape, rate).
inline double sample_inverse_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw DegenerateConditional("inverse-gamma parameters must be positive (shape " + std::to_string(shape) +
                                ", rate " + std::to_string(rate) + ")");
  }
  return rate / rng.gamma(shape);
}

}  // namespace ebfkit
