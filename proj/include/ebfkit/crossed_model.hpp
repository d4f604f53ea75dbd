#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ebfkit/csv.hpp"
#include "ebfkit/errors.hpp"
#include "ebfkit/linalg.hpp"
#include "ebfkit/sampling.hpp"

namespace ebfkit {

/// Standard deviations and correlation of one 2-vector of random effects:
/// Psi = [[tau1^2, tau1 tau2 rho], [tau1 tau2 rho, tau2^2]].
struct EffectPairTruth {
  double tau1 = 0.0;
  double tau2 = 0.0;
  double rho = 0.0;

  Eigen::Matrix2d covariance() const {
    Eigen::Matrix2d psi;
    psi << tau1 * tau1, tau1 * tau2 * rho, tau1 * tau2 * rho, tau2 * tau2;
    return psi;
  }
};

/// Generating model of the two-way cross-classified design:
///   y_ijk = alpha + x11 theta11_j + x12 theta12_j + x21 theta21_k + x22 theta22_k + eps_ijk
/// with (theta11_j, theta12_j) ~ N(0, Psi1), (theta21_k, theta22_k) ~ N(0, Psi2)
/// and eps ~ N(0, sigma2). Predictors are iid standard normal.
struct CrossedModelConfig {
  std::size_t J = 30;
  std::size_t K = 20;
  std::size_t n = 30;
  double alpha = 0.0;
  double sigma2 = 1.0;
  EffectPairTruth dim1{0.75, 0.5, 0.3};
  EffectPairTruth dim2{0.5, 0.0, 0.3};
  std::uint64_t seed = 1;

  void validate() const {
    if (J < 1 || K < 1 || n < 1) throw InvalidArgument("J, K and n must all be >= 1");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidArgument("sigma2 must be positive");
    if (!std::isfinite(alpha)) throw InvalidArgument("alpha must be finite");
    for (const auto* d : {&dim1, &dim2}) {
      if (!(d->tau1 >= 0.0) || !(d->tau2 >= 0.0) || !std::isfinite(d->tau1) || !std::isfinite(d->tau2)) {
        throw InvalidArgument("tau entries must be finite and >= 0");
      }
      if (!(std::abs(d->rho) < 1.0)) throw InvalidArgument("|rho| must be < 1");
    }
  }
};

/// Long-format observations. Cluster and replicate indices are 0-based in
/// memory and 1-based in files.
struct Dataset {
  std::size_t J = 0;
  std::size_t K = 0;
  std::vector<double> y, x11, x12, x21, x22;
  std::vector<std::size_t> i, j, k;

  std::size_t size() const { return y.size(); }

  void validate() const {
    const auto n = y.size();
    if (n == 0) throw InvalidArgument("dataset is empty");
    for (const auto* v : {&x11, &x12, &x21, &x22}) {
      if (v->size() != n) throw DimensionMismatch("dataset columns differ in length");
    }
    if (i.size() != n || j.size() != n || k.size() != n) throw DimensionMismatch("dataset index columns differ in length");
    for (std::size_t r = 0; r < n; ++r) {
      if (j[r] >= J || k[r] >= K) throw InvalidArgument("cluster index out of range at row " + std::to_string(r + 1));
      if (!std::isfinite(y[r]) || !std::isfinite(x11[r]) || !std::isfinite(x12[r]) || !std::isfinite(x21[r]) ||
          !std::isfinite(x22[r])) {
        throw NonFiniteValue("dataset row " + std::to_string(r + 1) + " is not finite");
      }
    }
  }
};

namespace detail {

// (theta_1, theta_2) = (tau1 z1, tau2 (rho z1 + sqrt(1 - rho^2) z2)); exact
// zeros when a tau is zero.
inline std::pair<double, double> draw_effect_pair(const EffectPairTruth& t, Rng& rng) {
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  return {t.tau1 * z1, t.tau2 * (t.rho * z1 + std::sqrt(1.0 - t.rho * t.rho) * z2)};
}

}  // namespace detail

/// Realised random effects of a simulated dataset, kept for diagnostics.
struct CrossedEffects {
  std::vector<std::pair<double, double>> dim1;
  std::vector<std::pair<double, double>> dim2;
};

inline Dataset simulate_dataset(const CrossedModelConfig& config, CrossedEffects* effects = nullptr) {
  config.validate();
  Rng rng(config.seed);
  CrossedEffects eff;
  eff.dim1.reserve(config.J);
  eff.dim2.reserve(config.K);
  for (std::size_t j = 0; j < config.J; ++j) eff.dim1.push_back(detail::draw_effect_pair(config.dim1, rng));
  for (std::size_t k = 0; k < config.K; ++k) eff.dim2.push_back(detail::draw_effect_pair(config.dim2, rng));

  Dataset d;
  d.J = config.J;
  d.K = config.K;
  const std::size_t total = config.J * config.K * config.n;
  for (auto* v : {&d.y, &d.x11, &d.x12, &d.x21, &d.x22}) v->reserve(total);
  d.i.reserve(total);
  d.j.reserve(total);
  d.k.reserve(total);
  const double sigma = std::sqrt(config.sigma2);
  for (std::size_t j = 0; j < config.J; ++j) {
    for (std::size_t k = 0; k < config.K; ++k) {
      for (std::size_t i = 0; i < config.n; ++i) {
        const double x11 = rng.normal(), x12 = rng.normal(), x21 = rng.normal(), x22 = rng.normal();
        const double mu = config.alpha + x11 * eff.dim1[j].first + x12 * eff.dim1[j].second +
                          x21 * eff.dim2[k].first + x22 * eff.dim2[k].second;
        d.y.push_back(mu + sigma * rng.normal());
        d.x11.push_back(x11);
        d.x12.push_back(x12);
        d.x21.push_back(x21);
        d.x22.push_back(x22);
        d.i.push_back(i);
        d.j.push_back(j);
        d.k.push_back(k);
      }
    }
  }
  if (effects) *effects = std::move(eff);
  return d;
}

inline constexpr const char* kDatasetHeader = "y,x11,x12,x21,x22,j,k,i";

inline void write_dataset(std::ostream& out, const Dataset& d) {
  out << kDatasetHeader << '\n';
  for (std::size_t r = 0; r < d.size(); ++r) {
    out << csv::format_double(d.y[r]) << ',' << csv::format_double(d.x11[r]) << ',' << csv::format_double(d.x12[r])
        << ',' << csv::format_double(d.x21[r]) << ',' << csv::format_double(d.x22[r]) << ',' << d.j[r] + 1 << ','
        << d.k[r] + 1 << ',' << d.i[r] + 1 << '\n';
  }
}

inline void write_dataset(const std::string& path, const Dataset& d) {
  auto out = csv::open_output(path);
  write_dataset(out, d);
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Reads a dataset CSV. J and K are the largest cluster indices seen.
inline Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || csv::trim(line) != kDatasetHeader) {
    throw ParseError(1, 1, "expected dataset header '" + std::string(kDatasetHeader) + "'");
  }
  Dataset d;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 8) throw ParseError(line_no, std::min<std::size_t>(f.size(), 8) + 1, "expected 8 fields");
    d.y.push_back(csv::parse_double(f[0], line_no, 1));
    d.x11.push_back(csv::parse_double(f[1], line_no, 2));
    d.x12.push_back(csv::parse_double(f[2], line_no, 3));
    d.x21.push_back(csv::parse_double(f[3], line_no, 4));
    d.x22.push_back(csv::parse_double(f[4], line_no, 5));
    const auto index = [&](std::size_t col) {
      const auto v = csv::parse_integer(f[col], line_no, col + 1);
      if (v < 1) throw ParseError(line_no, col + 1, "indices are 1-based");
      return static_cast<std::size_t>(v - 1);
    };
    d.j.push_back(index(5));
    d.k.push_back(index(6));
    d.i.push_back(index(7));
    d.J = std::max(d.J, d.j.back() + 1);
    d.K = std::max(d.K, d.k.back() + 1);
  }
  if (d.size() == 0) throw ParseError(line_no + 1, 1, "dataset has no rows");
  return d;
}

inline Dataset read_dataset(const std::string& path) {
  auto in = csv::open_input(path);
  return read_dataset(in);
}

}  // namespace ebfkit
