// Toy use of the library: J group means observed with known noise, a
// shared prior variance, and the log EBF for "all group effects are zero"
// as the true between-group variance grows.

#include <cstdio>
#include <random>

#include "ebfkit/ebfkit.hpp"

int main() {
  using namespace ebfkit;
  constexpr Eigen::Index kGroups = 20;
  constexpr double kNoise = 1.0;
  std::mt19937_64 gen(7);
  std::normal_distribution<double> z;

  const auto structure = CovarianceStructure::scaled_identity(kGroups);
  std::printf("true_tau2,tau2_hat,log_ebf01\n");
  for (double tau2 : {0.0, 0.1, 0.5, 2.0}) {
    Vector y(kGroups);
    for (Eigen::Index j = 0; j < kGroups; ++j) y(j) = std::sqrt(tau2) * z(gen) + std::sqrt(kNoise) * z(gen);
    // Method-of-moments estimate, floored so the prior stays proper.
    const double tau2_hat = std::max(y.squaredNorm() / kGroups - kNoise, 0.05);
    const double shrink = tau2_hat / (tau2_hat + kNoise);
    RandomEffectSummary post{"groups", shrink * y,
                             shrink * kNoise * Matrix::Identity(kGroups, kGroups), 0};
    const auto r = log_ebf(post, structure, TauPosterior::point({{"variance", tau2_hat}}));
    std::printf("%.2f,%.4f,%.4f\n", tau2, tau2_hat, r.log_ebf01);
  }
}
