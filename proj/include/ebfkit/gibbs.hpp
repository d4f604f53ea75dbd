#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ebfkit/covstruct.hpp"
#include "ebfkit/crossed_model.hpp"
#include "ebfkit/draws.hpp"
#include "ebfkit/errors.hpp"
#include "ebfkit/manifest.hpp"
#include "ebfkit/sampling.hpp"

namespace ebfkit {

struct GibbsConfig {
  std::size_t iterations = 6000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  /// Adds the scale moves of CrossedGibbs::rescale after each scan.
  bool scale_moves = true;

  void validate() const {
    if (iterations <= burn_in) throw InvalidArgument("iterations must exceed burn-in");
    if (thin < 1) throw InvalidArgument("thin must be >= 1");
  }

  std::size_t retained() const { return (iterations - burn_in) / thin; }
};

/// Conjugate priors of the crossed model. The default is the
/// noninformative set: p(alpha) = 1, p(Psi_d) = 1, p(sigma2) = 1/sigma2,
/// written as the limiting members of the conjugate families
/// (IW(-p-1, 0), IG(0, 0), infinite prior variance). Proper members are
/// used to check the sampler against its own prior.
struct CrossedPriors {
  double alpha_variance = std::numeric_limits<double>::infinity();
  double psi_df = -3.0;
  Eigen::Matrix2d psi_scale = Eigen::Matrix2d::Zero();
  double sigma2_shape = 0.0;
  double sigma2_rate = 0.0;

  static CrossedPriors flat() { return {}; }

  bool proper() const { return std::isfinite(alpha_variance) && psi_df > 1.0 && sigma2_shape > 0.0; }
};

/// Current values of every unknown in the crossed model.
struct CrossedState {
  double alpha = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, 2> dim1;  // J x 2: (theta11_j, theta12_j)
  Eigen::Matrix<double, Eigen::Dynamic, 2> dim2;  // K x 2: (theta21_k, theta22_k)
  Eigen::Matrix2d psi1 = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d psi2 = Eigen::Matrix2d::Identity();
  double sigma2 = 1.0;
};

/// Fewest clusters per dimension accepted under the flat prior on Psi: the
/// inverse-Wishart conditional has J - 3 degrees of freedom, which must
/// exceed p = 2.
inline constexpr std::size_t kMinClusters = 6;

/// Systematic-scan Gibbs sampler for the crossed model. Works from per-cell
/// sufficient statistics: with z = (1, x11, x12, x21, x22), each (j, k)
/// cell keeps sum z z', sum z y and sum y^2, so one scan costs O(J K)
/// regardless of the cell size.
class CrossedGibbs {
 public:
  using Mat5 = Eigen::Matrix<double, 5, 5>;
  using Vec5 = Eigen::Matrix<double, 5, 1>;

  CrossedGibbs(const Dataset& data, CrossedPriors priors = CrossedPriors::flat()) : priors_(priors) {
    data.validate();
    J_ = data.J;
    K_ = data.K;
    if (!priors_.proper() && (J_ < kMinClusters || K_ < kMinClusters)) {
      throw DegenerateConditional("the flat-prior sampler needs at least " + std::to_string(kMinClusters) +
                                  " clusters per dimension (inverse-Wishart degrees of freedom = clusters - 3); got J = " +
                                  std::to_string(J_) + ", K = " + std::to_string(K_));
    }
    set_data(data);
    initialize();
  }

  /// Replaces the responses and predictors, keeping the current state.
  void set_data(const Dataset& data) {
    if (data.J != J_ || data.K != K_) throw DimensionMismatch("dataset cluster counts changed");
    gram_.assign(J_ * K_, Mat5::Zero());
    zy_.assign(J_ * K_, Vec5::Zero());
    yy_.assign(J_ * K_, 0.0);
    n_obs_ = data.size();
    for (std::size_t r = 0; r < data.size(); ++r) {
      Vec5 z;
      z << 1.0, data.x11[r], data.x12[r], data.x21[r], data.x22[r];
      const auto c = cell(data.j[r], data.k[r]);
      gram_[c].noalias() += z * z.transpose();
      zy_[c] += z * data.y[r];
      yy_[c] += data.y[r] * data.y[r];
    }
    gram_dim1_.assign(J_, Eigen::Matrix2d::Zero());
    gram_dim2_.assign(K_, Eigen::Matrix2d::Zero());
    for (std::size_t j = 0; j < J_; ++j) {
      for (std::size_t k = 0; k < K_; ++k) {
        gram_dim1_[j] += gram_[cell(j, k)].block<2, 2>(1, 1);
        gram_dim2_[k] += gram_[cell(j, k)].block<2, 2>(3, 3);
      }
    }
  }

  /// alpha at the least-squares intercept, effects at zero, Psi at the
  /// identity and sigma2 at the least-squares residual variance.
  void initialize() {
    Mat5 g = Mat5::Zero();
    Vec5 h = Vec5::Zero();
    double yy = 0.0;
    for (std::size_t c = 0; c < gram_.size(); ++c) {
      g += gram_[c];
      h += zy_[c];
      yy += yy_[c];
    }
    state_.dim1.setZero(static_cast<Eigen::Index>(J_), 2);
    state_.dim2.setZero(static_cast<Eigen::Index>(K_), 2);
    state_.psi1.setIdentity();
    state_.psi2.setIdentity();
    Eigen::LDLT<Mat5> ldlt(g);
    if (ldlt.info() == Eigen::Success && n_obs_ > 5) {
      const Vec5 beta = ldlt.solve(h);
      state_.alpha = beta(0);
      const double rss = yy - beta.dot(h);
      state_.sigma2 = rss > 0.0 ? rss / static_cast<double>(n_obs_ - 5) : 1.0;
    } else {
      state_.alpha = h(0) / static_cast<double>(n_obs_);
      state_.sigma2 = 1.0;
    }
  }

  const CrossedState& state() const { return state_; }
  void set_state(const CrossedState& s) { state_ = s; }
  std::size_t J() const { return J_; }
  std::size_t K() const { return K_; }

  void set_scale_moves(bool on) { scale_moves_ = on; }

  /// One systematic scan: alpha, dimension-1 effects, dimension-2 effects,
  /// Psi1, Psi2, the optional scale moves, sigma2.
  void scan(Rng& rng, std::size_t iteration = 0) {
    try {
      update_alpha(rng);
      update_dim1(rng);
      update_dim2(rng);
      state_.psi1 = update_psi(state_.dim1, rng);
      state_.psi2 = update_psi(state_.dim2, rng);
      if (scale_moves_) {
        for (int d = 0; d < 2; ++d) {
          shear(d, 1, 0, rng);
          shear(d, 0, 1, rng);
          for (int rep = 0; rep < kScaleSweeps; ++rep) {
            rescale(d, 0, rng);
            rescale(d, 1, rng);
          }
        }
      }
      update_sigma2(rng);
    } catch (const Error& e) {
      throw DegenerateConditional("iteration " + std::to_string(iteration) + ": " + e.what());
    }
  }

 private:
  std::size_t cell(std::size_t j, std::size_t k) const { return j * K_ + k; }

  Vec5 coefficients(std::size_t j, std::size_t k) const {
    Vec5 beta;
    beta << state_.alpha, state_.dim1(j, 0), state_.dim1(j, 1), state_.dim2(k, 0), state_.dim2(k, 1);
    return beta;
  }

  void update_alpha(Rng& rng) {
    double s = 0.0;
    for (std::size_t j = 0; j < J_; ++j) {
      for (std::size_t k = 0; k < K_; ++k) {
        const auto& g = gram_[cell(j, k)];
        s += zy_[cell(j, k)](0) - g(0, 1) * state_.dim1(j, 0) - g(0, 2) * state_.dim1(j, 1) -
             g(0, 3) * state_.dim2(k, 0) - g(0, 4) * state_.dim2(k, 1);
      }
    }
    const double prec = static_cast<double>(n_obs_) / state_.sigma2 + 1.0 / priors_.alpha_variance;
    state_.alpha = (s / state_.sigma2) / prec + rng.normal() / std::sqrt(prec);
  }

  void update_dim1(Rng& rng) {
    const Eigen::Matrix2d prior_prec = state_.psi1.inverse();
    for (std::size_t j = 0; j < J_; ++j) {
      Eigen::Vector2d r = Eigen::Vector2d::Zero();
      for (std::size_t k = 0; k < K_; ++k) {
        const auto& g = gram_[cell(j, k)];
        r += zy_[cell(j, k)].segment<2>(1) - g.block<2, 1>(1, 0) * state_.alpha -
             g.block<2, 2>(1, 3) * state_.dim2.row(k).transpose();
      }
      const Eigen::Matrix2d prec = gram_dim1_[j] / state_.sigma2 + prior_prec;
      state_.dim1.row(j) = sample_normal_canonical(prec, Eigen::Vector2d(r / state_.sigma2), rng).transpose();
    }
  }

  void update_dim2(Rng& rng) {
    const Eigen::Matrix2d prior_prec = state_.psi2.inverse();
    for (std::size_t k = 0; k < K_; ++k) {
      Eigen::Vector2d r = Eigen::Vector2d::Zero();
      for (std::size_t j = 0; j < J_; ++j) {
        const auto& g = gram_[cell(j, k)];
        r += zy_[cell(j, k)].segment<2>(3) - g.block<2, 1>(3, 0) * state_.alpha -
             g.block<2, 2>(3, 1) * state_.dim1.row(j).transpose();
      }
      const Eigen::Matrix2d prec = gram_dim2_[k] / state_.sigma2 + prior_prec;
      state_.dim2.row(k) = sample_normal_canonical(prec, Eigen::Vector2d(r / state_.sigma2), rng).transpose();
    }
  }

  // Psi | effects ~ IW(psi_df + clusters, psi_scale + sum theta theta').
  Eigen::Matrix2d update_psi(const Eigen::Matrix<double, Eigen::Dynamic, 2>& effects, Rng& rng) const {
    const Eigen::Matrix2d scale = priors_.psi_scale + effects.transpose() * effects;
    const double df = priors_.psi_df + static_cast<double>(effects.rows());
    return sample_inverse_wishart(df, scale, rng);
  }

  // Move x -> g x that multiplies effect column a of dimension d by g > 0
  // and row and column a of Psi_d by g (so Psi_aa by g^2). With u = log g
  // the target of u is pi(g x) |J| with |J| = g^(clusters + 3); under the
  // flat prior the effect prior and the Jacobian leave g^3. u is updated by
  // one slice-sampling step from u = 0 (stepping out, then shrinkage),
  // which is translation invariant in u as the group move requires. The
  // move slides along the ridge between a small variance and small effects
  // that the plain scan crosses slowly.
  void rescale(int d, int a, Rng& rng) {
    auto& effects = d == 0 ? state_.dim1 : state_.dim2;
    auto& psi = d == 0 ? state_.psi1 : state_.psi2;
    const int z_index = 1 + 2 * d + a;
    // RSS(g) - RSS(1) = -2 (g - 1) sum(e f) + (g^2 - 1) sum(f^2), with f the
    // fitted contribution of the column and e the current residual.
    double ef = 0.0, ff = 0.0;
    for (std::size_t j = 0; j < J_; ++j) {
      for (std::size_t k = 0; k < K_; ++k) {
        const auto c = cell(j, k);
        const double t = effects(static_cast<Eigen::Index>(d == 0 ? j : k), a);
        const Vec5 beta = coefficients(j, k);
        ef += t * (zy_[c](z_index) - gram_[c].row(z_index).dot(beta));
        ff += t * t * gram_[c](z_index, z_index);
      }
    }
    const bool prior_scale = priors_.psi_scale.any();
    const double base_trace = prior_scale ? (priors_.psi_scale * psi.inverse()).trace() : 0.0;
    auto moved = [&](double u) {
      Eigen::Matrix2d scale = Eigen::Matrix2d::Identity();
      scale(a, a) = std::exp(u);
      return Eigen::Matrix2d(scale * psi * scale);
    };
    auto log_target = [&](double u) {
      const double g = std::exp(u);
      double out = -priors_.psi_df * u - (-2.0 * (g - 1.0) * (ef + ff) + (g * g - 1.0) * ff) / (2.0 * state_.sigma2);
      if (prior_scale) out -= 0.5 * ((priors_.psi_scale * moved(u).inverse()).trace() - base_trace);
      return out;
    };

    const double level = std::log(rng.uniform());  // relative to log_target(0) = 0
    double lo = -kSliceWidth * rng.uniform();
    double hi = lo + kSliceWidth;
    for (int i = 0; i < kSliceMaxSteps && log_target(lo) > level; ++i) lo -= kSliceWidth;
    for (int i = 0; i < kSliceMaxSteps && log_target(hi) > level; ++i) hi += kSliceWidth;
    for (;;) {
      const double u = lo + (hi - lo) * rng.uniform();
      if (log_target(u) > level) {
        const double g = std::exp(u);
        effects.col(a) *= g;
        const Eigen::Matrix2d m = moved(u);
        psi = 0.5 * (m + m.transpose());
        return;
      }
      (u < 0.0 ? lo : hi) = u;
    }
  }

  // Move x -> A x with A = I + s e_a e_b': adds s times effect column b to
  // column a of dimension d and maps Psi_d to A Psi_d A'. det A = 1, so
  // under the flat prior the conditional of s is the Gaussian likelihood
  // factor N(sum(e f) / sum(f^2), sigma2 / sum(f^2)) with f = z_a theta_b;
  // it is drawn exactly and a proper prior on Psi enters as a Metropolis
  // correction.
  void shear(int d, int a, int b, Rng& rng) {
    auto& effects = d == 0 ? state_.dim1 : state_.dim2;
    auto& psi = d == 0 ? state_.psi1 : state_.psi2;
    const int z_index = 1 + 2 * d + a;
    double ef = 0.0, ff = 0.0;
    for (std::size_t j = 0; j < J_; ++j) {
      for (std::size_t k = 0; k < K_; ++k) {
        const auto c = cell(j, k);
        const double t = effects(static_cast<Eigen::Index>(d == 0 ? j : k), b);
        const Vec5 beta = coefficients(j, k);
        ef += t * (zy_[c](z_index) - gram_[c].row(z_index).dot(beta));
        ff += t * t * gram_[c](z_index, z_index);
      }
    }
    if (!(ff > 0.0)) return;
    const double s = ef / ff + std::sqrt(state_.sigma2 / ff) * rng.normal();
    Eigen::Matrix2d shift = Eigen::Matrix2d::Identity();
    shift(a, b) = s;
    const Eigen::Matrix2d moved = shift * psi * shift.transpose();
    if (priors_.psi_scale.any()) {
      const double log_ratio =
          -0.5 * ((priors_.psi_scale * moved.inverse()).trace() - (priors_.psi_scale * psi.inverse()).trace());
      if (!(std::log(rng.uniform()) < log_ratio)) return;
    }
    effects.col(a) += s * effects.col(b);
    psi = 0.5 * (moved + moved.transpose());
  }

  void update_sigma2(Rng& rng) {
    double rss = 0.0;
    for (std::size_t j = 0; j < J_; ++j) {
      for (std::size_t k = 0; k < K_; ++k) {
        const auto c = cell(j, k);
        const Vec5 beta = coefficients(j, k);
        rss += yy_[c] - 2.0 * beta.dot(zy_[c]) + beta.dot(gram_[c] * beta);
      }
    }
    if (!(rss > 0.0)) throw DegenerateConditional("residual sum of squares is not positive");
    state_.sigma2 = sample_inverse_gamma(priors_.sigma2_shape + 0.5 * static_cast<double>(n_obs_),
                                         priors_.sigma2_rate + 0.5 * rss, rng);
  }

  static constexpr int kScaleSweeps = 2;
  static constexpr double kSliceWidth = 1.0;
  static constexpr int kSliceMaxSteps = 50;

  CrossedPriors priors_;
  bool scale_moves_ = true;
  std::size_t J_ = 0;
  std::size_t K_ = 0;
  std::size_t n_obs_ = 0;
  std::vector<Mat5, Eigen::aligned_allocator<Mat5>> gram_;
  std::vector<Vec5, Eigen::aligned_allocator<Vec5>> zy_;
  std::vector<double> yy_;
  std::vector<Eigen::Matrix2d, Eigen::aligned_allocator<Eigen::Matrix2d>> gram_dim1_;
  std::vector<Eigen::Matrix2d, Eigen::aligned_allocator<Eigen::Matrix2d>> gram_dim2_;
  CrossedState state_;
};

/// Column names of the sampler output, in order: alpha, theta_11_1..J,
/// theta_12_1..J, theta_21_1..K, theta_22_1..K, psi1_11, psi1_12, psi1_22,
/// psi2_11, psi2_12, psi2_22, sigma2.
inline std::vector<std::string> crossed_draw_columns(std::size_t J, std::size_t K) {
  std::vector<std::string> cols{"alpha"};
  for (const char* effect : {"11", "12"}) {
    for (std::size_t j = 1; j <= J; ++j) cols.push_back(std::string("theta_") + effect + "_" + std::to_string(j));
  }
  for (const char* effect : {"21", "22"}) {
    for (std::size_t k = 1; k <= K; ++k) cols.push_back(std::string("theta_") + effect + "_" + std::to_string(k));
  }
  for (const char* psi : {"psi1_11", "psi1_12", "psi1_22", "psi2_11", "psi2_12", "psi2_22", "sigma2"}) {
    cols.emplace_back(psi);
  }
  return cols;
}

inline void append_state(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, const CrossedState& s) {
  Eigen::Index c = 0;
  row(c++) = s.alpha;
  for (int e = 0; e < 2; ++e) {
    for (Eigen::Index j = 0; j < s.dim1.rows(); ++j) row(c++) = s.dim1(j, e);
  }
  for (int e = 0; e < 2; ++e) {
    for (Eigen::Index k = 0; k < s.dim2.rows(); ++k) row(c++) = s.dim2(k, e);
  }
  row(c++) = s.psi1(0, 0);
  row(c++) = s.psi1(0, 1);
  row(c++) = s.psi1(1, 1);
  row(c++) = s.psi2(0, 0);
  row(c++) = s.psi2(0, 1);
  row(c++) = s.psi2(1, 1);
  row(c++) = s.sigma2;
}

/// Runs the sampler and returns the retained (post burn-in, thinned) draws.
/// Iteration t (0-based) is kept when t >= burn_in and
/// (t - burn_in + 1) is a multiple of thin.
inline DrawsMatrix gibbs_fit(const Dataset& data, const GibbsConfig& config,
                             const CrossedPriors& priors = CrossedPriors::flat()) {
  config.validate();
  CrossedGibbs sampler(data, priors);
  sampler.set_scale_moves(config.scale_moves);
  Rng rng(config.seed);
  DrawsMatrix out;
  out.columns = crossed_draw_columns(data.J, data.K);
  out.values.resize(static_cast<Eigen::Index>(config.retained()), static_cast<Eigen::Index>(out.columns.size()));
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < config.iterations && row < out.values.rows(); ++t) {
    sampler.scan(rng, t);
    if (t >= config.burn_in && (t - config.burn_in + 1) % config.thin == 0) {
      append_state(out.values.row(row++), sampler.state());
    }
  }
  return out;
}

/// Manifest for the four single-effect tests of the crossed model. Each
/// block tests one effect column group against its variance entry of Psi_d,
/// i.e. a scaled identity prior psi_d,aa I.
inline BlockManifest crossed_manifest(std::size_t J, std::size_t K, double ridge = 0.0,
                                      EbfVariant variant = EbfVariant::PosteriorMean) {
  BlockManifest m;
  m.options = {ridge, variant};
  struct Spec {
    const char* id;
    std::size_t count;
    const char* variance;
  };
  for (const Spec& s : {Spec{"theta_11", J, "psi1_11"}, Spec{"theta_12", J, "psi1_22"},
                        Spec{"theta_21", K, "psi2_11"}, Spec{"theta_22", K, "psi2_22"}}) {
    ManifestBlock b{s.id, {}, CovarianceStructure::scaled_identity(s.count), {{"variance", s.variance}}};
    for (std::size_t c = 1; c <= s.count; ++c) b.effects.push_back(std::string(s.id) + "_" + std::to_string(c));
    m.blocks.push_back(std::move(b));
  }
  return m;
}

}  // namespace ebfkit
