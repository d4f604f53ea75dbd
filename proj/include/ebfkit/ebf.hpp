#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ebfkit/covstruct.hpp"
#include "ebfkit/errors.hpp"
#include "ebfkit/ess.hpp"
#include "ebfkit/linalg.hpp"
#include "ebfkit/numeric.hpp"

namespace ebfkit {

// Every density below omits the (2 pi)^{-J/2} factor; it is common to the
// numerator and the denominator of the Savage-Dickey ratio.

enum class EbfVariant { PosteriorMean, FullPosterior };

inline const char* to_string(EbfVariant v) {
  return v == EbfVariant::PosteriorMean ? "mean" : "full";
}

inline EbfVariant parse_variant(const std::string& s) {
  if (s == "mean") return EbfVariant::PosteriorMean;
  if (s == "full") return EbfVariant::FullPosterior;
  throw InvalidArgument("unknown variant '" + s + "' (expected mean or full)");
}

/// Gaussian approximation to the posterior of one tested block of random
/// effects: posterior mean and posterior covariance.
struct RandomEffectSummary {
  std::string block_id;
  Vector mean;
  Matrix covariance;
  std::size_t n_draws_used = 0;
};

struct EbfDiagnostics {
  double ridge = 0.0;
  std::size_t tau_draws = 0;
  std::size_t degenerate_draws = 0;
  /// ESS of the Monte Carlo terms |Psi(tau_s)|^{-1/2} (full variant, S >= 10).
  std::optional<double> det_term_ess;
};

struct EbfResult {
  std::string block_id;
  double log_numerator = 0.0;
  double log_denominator = 0.0;
  double log_ebf01 = 0.0;
  EbfVariant variant = EbfVariant::PosteriorMean;
  std::size_t dim = 0;
  EbfDiagnostics notes;

  /// EBF01 < 1 selects the model that includes the tested random effects.
  bool selects_full_model() const { return log_ebf01 < 0.0; }
};

/// Posterior information about the variance components: a point estimate
/// (posterior means of the covariance entries) or the draws themselves.
class TauPosterior {
 public:
  static TauPosterior point(VarianceParams tau_bar) { return TauPosterior(std::move(tau_bar)); }
  static TauPosterior draws(std::vector<VarianceParams> tau_draws) {
    return TauPosterior(std::move(tau_draws));
  }

  EbfVariant variant() const {
    return std::holds_alternative<VarianceParams>(value_) ? EbfVariant::PosteriorMean
                                                          : EbfVariant::FullPosterior;
  }
  const VarianceParams& point_value() const { return std::get<VarianceParams>(value_); }
  const std::vector<VarianceParams>& draw_values() const {
    return std::get<std::vector<VarianceParams>>(value_);
  }

 private:
  explicit TauPosterior(VarianceParams v) : value_(std::move(v)) {}
  explicit TauPosterior(std::vector<VarianceParams> v) : value_(std::move(v)) {}

  std::variant<VarianceParams, std::vector<VarianceParams>> value_;
};

/// log N(0 | mean, cov) + (J/2) log(2 pi) = -1/2 log|cov| - 1/2 mean' cov^{-1} mean.
inline double gaussian_log_density_at_zero(const RandomEffectSummary& summary) {
  const auto j = summary.mean.size();
  if (j == 0) throw DimensionMismatch("block '" + summary.block_id + "' has no effects");
  if (summary.covariance.rows() != j || summary.covariance.cols() != j) {
    throw DimensionMismatch("block '" + summary.block_id + "': mean has length " +
                            std::to_string(j) + " but covariance is " +
                            std::to_string(summary.covariance.rows()) + "x" +
                            std::to_string(summary.covariance.cols()));
  }
  if (!summary.mean.allFinite()) throw NonFiniteValue("block '" + summary.block_id + "' mean is not finite");
  const auto llt = cholesky(summary.covariance, "posterior covariance of block '" + summary.block_id + "'");
  const Vector w = llt.matrixL().solve(summary.mean);
  return -0.5 * log_det_from_cholesky(llt) - 0.5 * w.squaredNorm();
}

/// Prior density at zero with the variance components fixed at a point
/// estimate: -1/2 log|Psi(tau_bar)|.
inline double log_prior_density_at_zero_mean(const CovarianceStructure& structure,
                                             const VarianceParams& tau_bar) {
  return -0.5 * structure.log_det(tau_bar);
}

struct FullPriorDensity {
  double log_density = 0.0;
  std::size_t used = 0;
  std::size_t degenerate = 0;
  std::optional<double> term_ess;
};

/// Fraction of draws allowed to fail factorisation before the full-posterior
/// average is rejected.
inline constexpr double kMaxDegenerateFraction = 0.01;

/// Prior density at zero averaged over posterior draws of the variance
/// components: log(S^{-1} sum_s |Psi(tau_s)|^{-1/2}) via log-sum-exp. Draws
/// whose Psi fails Cholesky are excluded and counted.
inline FullPriorDensity full_prior_log_density(const CovarianceStructure& structure,
                                               std::span<const VarianceParams> tau_draws) {
  if (tau_draws.empty()) throw EmptyDraws("no variance-component draws supplied");
  std::vector<double> terms;
  terms.reserve(tau_draws.size());
  FullPriorDensity out;
  for (const auto& draw : tau_draws) {
    try {
      terms.push_back(-0.5 * structure.log_det(draw));
    } catch (const NotPositiveDefinite&) {
      ++out.degenerate;
    }
  }
  if (terms.empty()) {
    throw AllDrawsDegenerate("all " + std::to_string(tau_draws.size()) +
                             " variance-component draws give a non-positive-definite Psi");
  }
  if (static_cast<double>(out.degenerate) > kMaxDegenerateFraction * static_cast<double>(tau_draws.size())) {
    throw AllDrawsDegenerate(std::to_string(out.degenerate) + " of " + std::to_string(tau_draws.size()) +
                             " variance-component draws are degenerate (limit 1%)");
  }
  out.used = terms.size();
  out.log_density = log_mean_exp(terms);
  if (terms.size() >= kMinEssLength) {
    std::vector<double> weights(terms.size());
    for (std::size_t s = 0; s < terms.size(); ++s) weights[s] = std::exp(terms[s] - out.log_density);
    out.term_ess = ess(weights).value;
  }
  return out;
}

inline double log_prior_density_at_zero_full(const CovarianceStructure& structure,
                                             std::span<const VarianceParams> tau_draws) {
  return full_prior_log_density(structure, tau_draws).log_density;
}

/// log EBF01 for one block. Positive values favour excluding the block.
inline EbfResult log_ebf(const RandomEffectSummary& summary, const CovarianceStructure& structure,
                         const TauPosterior& tau) {
  if (structure.dim() != static_cast<std::size_t>(summary.mean.size())) {
    throw DimensionMismatch("block '" + summary.block_id + "' has " + std::to_string(summary.mean.size()) +
                            " effects but its structure has dim " + std::to_string(structure.dim()));
  }
  EbfResult r;
  r.block_id = summary.block_id;
  r.dim = structure.dim();
  r.variant = tau.variant();
  r.log_numerator = gaussian_log_density_at_zero(summary);
  if (r.variant == EbfVariant::PosteriorMean) {
    r.log_denominator = log_prior_density_at_zero_mean(structure, tau.point_value());
  } else {
    const auto full = full_prior_log_density(structure, tau.draw_values());
    r.log_denominator = full.log_density;
    r.notes.tau_draws = tau.draw_values().size();
    r.notes.degenerate_draws = full.degenerate;
    r.notes.det_term_ess = full.term_ess;
  }
  r.log_ebf01 = r.log_numerator - r.log_denominator;
  return r;
}

/// One block of a joint test: its prior structure and point estimate.
struct JointBlock {
  std::string block_id;
  CovarianceStructure structure;
  VarianceParams tau_bar;
};

inline std::string joint_block_id(std::span<const JointBlock> blocks) {
  std::string id = "joint:";
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) id += '+';
    id += blocks[b].block_id;
  }
  return id;
}

/// Joint log EBF01 over several stacked blocks. The numerator uses the full
/// joint posterior covariance; the prior is block diagonal, so the
/// denominator is the sum of the per-block point-estimate terms.
inline EbfResult log_ebf_joint(std::span<const JointBlock> blocks, const Vector& joint_mean,
                               const Matrix& joint_cov, double ridge = 0.0) {
  if (blocks.empty()) throw InvalidArgument("joint test needs at least one block");
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.structure.dim();
  if (total != static_cast<std::size_t>(joint_mean.size()) ||
      total != static_cast<std::size_t>(joint_cov.rows()) ||
      total != static_cast<std::size_t>(joint_cov.cols())) {
    throw DimensionMismatch("joint blocks span " + std::to_string(total) + " effects but the joint mean has " +
                            std::to_string(joint_mean.size()) + " and the joint covariance is " +
                            std::to_string(joint_cov.rows()) + "x" + std::to_string(joint_cov.cols()));
  }
  RandomEffectSummary joint{joint_block_id(blocks), joint_mean, validate_pd(joint_cov, ridge), 0};
  EbfResult r;
  r.block_id = joint.block_id;
  r.dim = total;
  r.variant = EbfVariant::PosteriorMean;
  r.notes.ridge = ridge;
  r.log_numerator = gaussian_log_density_at_zero(joint);
  for (const auto& b : blocks) r.log_denominator += log_prior_density_at_zero_mean(b.structure, b.tau_bar);
  r.log_ebf01 = r.log_numerator - r.log_denominator;
  return r;
}

}  // namespace ebfkit
