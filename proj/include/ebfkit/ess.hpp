#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ebfkit/errors.hpp"

namespace ebfkit {

struct EssResult {
  double value = 0.0;
  /// Set for a constant series, whose ESS is reported as S by convention.
  bool degenerate = false;
};

inline constexpr std::size_t kMinEssLength = 10;

/// Effective sample size with Geyer's initial monotone positive sequence
/// estimator. Autocovariances use divisor S; consecutive lag pairs
/// Gamma_m = gamma_{2m} + gamma_{2m+1} are summed until the first
/// non-positive pair, each pair capped at its predecessor. The result is
/// clamped to (0, S].
inline EssResult ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < kMinEssLength) {
    throw TooShort("ESS needs at least " + std::to_string(kMinEssLength) + " draws, got " +
                   std::to_string(n));
  }
  double lo = series[0], hi = series[0], sum = 0.0;
  for (double v : series) {
    if (!std::isfinite(v)) throw NonFiniteValue("ESS input contains a non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  const double s = static_cast<double>(n);
  if (lo == hi) return {s, true};

  const double mean = sum / s;
  std::vector<double> c(n);
  for (std::size_t t = 0; t < n; ++t) c[t] = series[t] - mean;

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += c[t] * c[t + lag];
    return acc / s;
  };

  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) return {s, true};

  double pair_sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = (m == 0 ? gamma0 : autocov(2 * m)) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    pair_sum += pair;
  }
  const double asym_var = -gamma0 + 2.0 * pair_sum;
  if (!(asym_var > 0.0)) return {s, false};
  return {std::min(s, s * gamma0 / asym_var), false};
}

/// ESS of several chains stored back to back: rows sharing a chain id are
/// grouped (in order of first appearance), ESS is computed per chain and
/// summed.
inline EssResult ess_by_chain(std::span<const double> series, std::span<const int> chain_ids) {
  if (chain_ids.empty()) return ess(series);
  if (chain_ids.size() != series.size()) {
    throw DimensionMismatch("chain ids and series differ in length");
  }
  std::vector<int> order;
  std::map<int, std::vector<double>> chains;
  for (std::size_t t = 0; t < series.size(); ++t) {
    auto [it, inserted] = chains.try_emplace(chain_ids[t]);
    if (inserted) order.push_back(chain_ids[t]);
    it->second.push_back(series[t]);
  }
  EssResult total{0.0, true};
  for (int id : order) {
    const auto r = ess(chains.at(id));
    total.value += r.value;
    total.degenerate = total.degenerate && r.degenerate;
  }
  return total;
}

}  // namespace ebfkit
