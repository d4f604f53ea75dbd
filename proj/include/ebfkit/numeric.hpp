#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ebfkit/errors.hpp"

namespace ebfkit {

/// log(sum(exp(x))) without overflow. Returns -inf for an empty input.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

/// log(mean(exp(x))).
inline double log_mean_exp(std::span<const double> x) {
  if (x.empty()) throw EmptyInput("log_mean_exp of an empty sequence");
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

/// Empirical quantiles with linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R default): h = (n - 1) p, interpolate between
/// x[floor(h)] and x[floor(h) + 1].
inline std::vector<double> quantiles(std::span<const double> values, std::span<const double> probs) {
  if (values.empty()) throw EmptyInput("quantiles of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw NonFiniteValue("quantiles input contains a non-finite value");
  }
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile probability outside [0, 1]");
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, n - 1);
    out.push_back(sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
  }
  return out;
}

inline double quantile(std::span<const double> values, double prob) {
  const double p[] = {prob};
  return quantiles(values, p).front();
}

}  // namespace ebfkit
