// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed
// below. Exit status is nonzero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ebfkit/ebfkit.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace ebfkit;
namespace fs = std::filesystem;

namespace {

// AC1
constexpr int kOracleCases = 100;
constexpr double kOracleTol = 1e-8;
constexpr double kOracleSeconds = 1.0;
// AC2: "exactly" up to the rounding gap between the closed-form and the
// Cholesky log-determinant.
constexpr int kIdentityCases = 500;
constexpr double kIdentityTol = 1e-12;
// AC3
constexpr int kJensenCases = 1000;
constexpr double kJensenTol = 1e-12;
// AC4
constexpr int kJointCases = 200;
constexpr double kJointTol = 1e-10;
// AC5 / AC6
constexpr int kCalibrationRuns = 40;
constexpr double kCalibrationTruth = 0.5625;
constexpr double kCalibrationSds = 3.0;
constexpr double kCalibrationCoverage = 0.95;
constexpr double kMinEss = 2000.0;
// AC7
constexpr std::size_t kTrendReplications = 50;
constexpr std::size_t kTrendJ = 100;
constexpr std::size_t kTrendN = 100;
constexpr double kNullSelectionMax = 0.2;
// AC8
constexpr int kLogDetCases = 200;
constexpr double kLogDetTol = 1e-8;

constexpr std::uint64_t kMasterSeed = 20240101;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %s %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Runs `body`; an escaping exception fails the criterion with its message.
void criterion(const char* id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

void ac1() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(101);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int c = 0; c < kOracleCases; ++c) {
    const auto j = static_cast<Eigen::Index>(testgen::uniform_int(gen, 1, 5));
    const auto n = static_cast<Eigen::Index>(testgen::uniform_int(gen, 1, 20));
    Matrix x(n, j);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index k = 0; k < j; ++k) x(r, k) = z(gen);
    }
    const double sigma2 = testgen::log_uniform(gen, 0.1, 4.0);
    const double tau2 = testgen::log_uniform(gen, 0.05, 5.0);
    Vector y(n);
    for (Eigen::Index r = 0; r < n; ++r) y(r) = std::sqrt(sigma2 + tau2) * z(gen);
    const Matrix psi = tau2 * Matrix::Identity(j, j);
    const auto [mean, cov] = oracle::conjugate_posterior(y, x, sigma2, psi);
    const auto r = log_ebf({"b", mean, cov, 0}, CovarianceStructure::scaled_identity(static_cast<std::size_t>(j)),
                           TauPosterior::point({{"variance", tau2}}));
    worst = std::max(worst, std::abs(r.log_ebf01 - oracle::conjugate_log_bf01(y, x, sigma2, psi)));
  }
  const double secs = seconds_since(t0);
  report("AC1", worst <= kOracleTol && secs < kOracleSeconds,
         fmt("Savage-Dickey vs analytic Bayes factor: %d cases, max |diff| = %.3g (tol %.0e), %.3f s (limit %.0f s)",
             kOracleCases, worst, kOracleTol, secs, kOracleSeconds));
}

void ac2() {
  std::mt19937_64 gen(202);
  double worst = 0.0;
  for (int c = 0; c < kIdentityCases; ++c) {
    const auto cs = testgen::random_case(testgen::kAllKinds[c % 5], gen);
    const Matrix psi = build_covariance(cs.structure, cs.params);
    const auto r = log_ebf({"b", Vector::Zero(psi.rows()), psi, 0}, cs.structure, TauPosterior::point(cs.params));
    worst = std::max(worst, std::abs(r.log_ebf01));
  }
  report("AC2", worst <= kIdentityTol,
         fmt("theta=0, Sigma=Psi(tau) gives log EBF 0: %d cases over 5 kinds, max |log EBF| = %.3g (tol %.0e)",
             kIdentityCases, worst, kIdentityTol));
}

void ac3() {
  std::mt19937_64 gen(303);
  int violations = 0;
  double worst = -INFINITY;
  for (int c = 0; c < kJensenCases; ++c) {
    const auto cs = testgen::random_case(testgen::kAffineKinds[c % 4], gen);
    const auto s = testgen::uniform_int(gen, 2, 50);
    std::vector<VarianceParams> draws;
    VarianceParams mean;
    for (const auto& slot : cs.structure.slots()) mean.set(slot, 0.0);
    for (std::size_t d = 0; d < s; ++d) {
      draws.push_back(testgen::random_params(cs.structure, gen));
      for (const auto& [slot, v] : draws.back()) mean.set(slot, mean.at(slot) + v / static_cast<double>(s));
    }
    const Matrix psi = build_covariance(cs.structure, mean);
    std::normal_distribution<double> z;
    Vector m(psi.rows());
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = z(gen);
    const RandomEffectSummary summary{"b", m, oracle::random_spd(psi.rows(), gen), 0};
    const double full = log_ebf(summary, cs.structure, TauPosterior::draws(draws)).log_ebf01;
    const double point = log_ebf(summary, cs.structure, TauPosterior::point(mean)).log_ebf01;
    worst = std::max(worst, full - point);
    if (full > point + kJensenTol) ++violations;
  }
  report("AC3", violations == 0,
         fmt("Jensen ordering full <= mean: %d cases, %d violations beyond %.0e (max full - mean = %.3g)",
             kJensenCases, violations, kJensenTol, worst));
}

void ac4() {
  std::mt19937_64 gen(404);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int c = 0; c < kJointCases; ++c) {
    const auto n_blocks = testgen::uniform_int(gen, 2, 4);
    std::vector<JointBlock> blocks;
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    double sum = 0.0;
    Eigen::Index total = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      auto cs = testgen::random_case(testgen::kAllKinds[(c + b) % 5], gen);
      const auto j = static_cast<Eigen::Index>(cs.structure.dim());
      Vector m(j);
      for (Eigen::Index i = 0; i < j; ++i) m(i) = z(gen);
      const Matrix cov = oracle::random_spd(j, gen);
      const std::string id = "b" + std::to_string(b);
      sum += log_ebf({id, m, cov, 0}, cs.structure, TauPosterior::point(cs.params)).log_ebf01;
      blocks.push_back({id, cs.structure, cs.params});
      means.push_back(m);
      covs.push_back(cov);
      total += j;
    }
    Vector jm(total);
    Matrix jc = Matrix::Zero(total, total);
    Eigen::Index at = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const auto j = means[b].size();
      jm.segment(at, j) = means[b];
      jc.block(at, at, j, j) = covs[b];
      at += j;
    }
    const double joint = log_ebf_joint(blocks, jm, jc).log_ebf01;
    worst = std::max(worst, std::abs(joint - sum) / std::max(1.0, std::abs(sum)));
  }
  report("AC4", worst <= kJointTol,
         fmt("joint log EBF = sum over blocks for block-diagonal covariance: %d cases, max rel |diff| = %.3g "
             "(tol %.0e)",
             kJointCases, worst, kJointTol));
}

void ac5_ac6() {
  const auto t0 = Clock::now();
  int covered = 0;
  double min_ess = INFINITY;
  std::string min_ess_where;
  int ess_failures = 0;
  for (int run = 0; run < kCalibrationRuns; ++run) {
    CrossedModelConfig m;  // J = 30, K = 20, n = 30, tau11 = 0.75
    m.seed = stream_seed(kMasterSeed, static_cast<std::uint64_t>(run), 1);
    GibbsConfig g;  // 6000 iterations, 1000 burn-in: 5000 retained
    g.seed = stream_seed(kMasterSeed, static_cast<std::uint64_t>(run), 2);
    const auto draws = gibbs_fit(simulate_dataset(m), g);
    const Vector psi = draws.column("psi1_11");
    const double mean = psi.mean();
    const double sd = std::sqrt((psi.array() - mean).square().sum() / (psi.size() - 1.0));
    if (std::abs(mean - kCalibrationTruth) <= kCalibrationSds * sd) ++covered;
    for (const char* col : {"psi1_11", "psi1_22", "psi2_11", "psi2_22"}) {
      const Vector v = draws.column(col);
      const double e = ess(std::span<const double>(v.data(), v.size())).value;
      if (e < kMinEss) ++ess_failures;
      if (e < min_ess) {
        min_ess = e;
        min_ess_where = fmt("%s run %d", col, run);
      }
    }
  }
  const double coverage = covered / static_cast<double>(kCalibrationRuns);
  const double secs = seconds_since(t0);
  report("AC5", coverage >= kCalibrationCoverage,
         fmt("Gibbs calibration J=30 K=20 n=30: posterior mean of psi1_11 within %.0f sd of %.4f in %d/%d runs "
             "(%.3f, need >= %.2f), %.1f s",
             kCalibrationSds, kCalibrationTruth, covered, kCalibrationRuns, coverage, kCalibrationCoverage, secs));
  report("AC6", ess_failures == 0,
         fmt("ESS of psi variance columns over 5000 draws, same %d fits: min %.0f (%s), %d of %d below %.0f",
             kCalibrationRuns, min_ess, min_ess_where.c_str(), ess_failures, 4 * kCalibrationRuns, kMinEss));
}

void ac7() {
  const auto t0 = Clock::now();
  SimStudyConfig c;
  c.tau11_grid = {0.0, 0.8};
  c.J_list = {kTrendJ};
  c.n_list = {kTrendN};
  c.replications = kTrendReplications;
  c.master_seed = kMasterSeed;
  const auto null_cell = run_cell(c, {0.0, kTrendJ, kTrendN}, 1);
  const auto alt_cell = run_cell(c, {0.8, kTrendJ, kTrendN}, 1);
  constexpr int kMean = 0, kFull = 1, kTheta11 = 0;
  const auto& n_mean = null_cell.stats[kTheta11][kMean];
  const auto& n_full = null_cell.stats[kTheta11][kFull];
  const auto& a_mean = alt_cell.stats[kTheta11][kMean];
  const bool a = n_mean.q50 > 0.0 && a_mean.q50 < 0.0;
  const bool b = n_mean.select_full <= kNullSelectionMax && a_mean.select_full == 1.0;
  const bool cc = n_full.select_full > n_mean.select_full;
  double min_var_mean = INFINITY;
  for (const auto* cell : {&null_cell, &alt_cell}) {
    for (const auto& r : cell->raw) {
      if (!r.ok) continue;
      for (int p : {0, 2, 3, 5}) min_var_mean = std::min(min_var_mean, r.psi_mean[static_cast<std::size_t>(p)]);
    }
  }
  const bool d = min_var_mean > 0.0;
  const double secs = seconds_since(t0);
  report("AC7", a && b && cc && d,
         fmt("trends R=%zu J=%zu n=%zu (failed reps %zu+%zu): "
             "(a) %s median log EBF theta11 %.3f at tau11=0 (>0), %.3f at 0.8 (<0); "
             "(b) %s selection %.2f at 0 (<=%.1f), %.2f at 0.8 (=1); "
             "(c) %s full %.2f > mean %.2f at 0; "
             "(d) %s min posterior mean of psi variances %.3g (>0); %.0f s",
             kTrendReplications, kTrendJ, kTrendN, null_cell.failures, alt_cell.failures, a ? "ok" : "NO", n_mean.q50,
             a_mean.q50, b ? "ok" : "NO", n_mean.select_full, kNullSelectionMax, a_mean.select_full,
             cc ? "ok" : "NO", n_full.select_full, n_mean.select_full, d ? "ok" : "NO", min_var_mean, secs));
}

void ac8() {
  std::mt19937_64 gen(808);
  double worst = 0.0;
  for (auto kind : testgen::kAllKinds) {
    for (int c = 0; c < kLogDetCases; ++c) {
      const auto cs = testgen::random_case(kind, gen);
      const double dense = log_det_from_cholesky(cholesky(build_covariance(cs.structure, cs.params), "ac8"));
      worst = std::max(worst, std::abs(log_det(cs.structure, cs.params) - dense));
    }
  }
  report("AC8", worst <= kLogDetTol,
         fmt("fast-path log det vs dense Cholesky: %d cases x 5 kinds (CAR with random sub-stochastic W, "
             "BlockKronecker p<=3 m<=5), max |diff| = %.3g (tol %.0e)",
             kLogDetCases, worst, kLogDetTol));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = "'" + std::string(EBFKIT_CLI_PATH) + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void ac9() {
  const auto root = fs::temp_directory_path() / "ebfkit_acceptance_ac9";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "sim.toml") << "J = 30\nK = 20\nn = 30\nseed = 17\ntau11 = 0.75\n";
  std::ofstream(root / "study.toml") << "tau11_grid = [0.4]\nJ_list = [10]\nn_list = [10]\nreplications = 20\n"
                                        "master_seed = 99\njobs = 4\n";
  bool ok = true;
  std::string bad;
  double study_secs = 0.0;
  for (const char* id : {"1", "2"}) {
    const auto dir = root / id;
    fs::create_directories(dir);
    const auto p = [&](const char* name) { return (dir / name).string(); };
    ok &= run_cli("simulate --config " + (root / "sim.toml").string() + " --out " + p("data.csv")) == 0;
    ok &= run_cli("fit --data " + p("data.csv") + " --seed 5 --out-draws " + p("draws.csv") + " --out-manifest " +
                  p("manifest.json")) == 0;
    ok &= run_cli("ebf --draws " + p("draws.csv") + " --manifest " + p("manifest.json") + " --out " + p("mean.csv")) == 0;
    ok &= run_cli("ebf --draws " + p("draws.csv") + " --manifest " + p("manifest.json") + " --variant full --out " +
                  p("full.csv")) == 0;
    const auto t0 = Clock::now();
    ok &= run_cli("study --config " + (root / "study.toml").string() + " --out-dir " + p("study") + " --jobs 4") == 0;
    study_secs = seconds_since(t0);
  }
  if (!ok) bad = "a command exited nonzero";
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "1")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root / "1");
    ++compared;
    if (slurp(entry.path()) != slurp(root / "2" / rel)) {
      ok = false;
      bad += " differs: " + rel.string();
    }
  }
  ok &= compared >= 7;
  report("AC9", ok,
         fmt("simulate -> fit -> ebf and study twice with equal seeds and --jobs 4: %zu files byte-identical%s; "
             "1-cell smoke study R=20 J=10 n=10 took %.1f s",
             compared, bad.empty() ? "" : (" [" + bad + "]").c_str(), study_secs));
}

}  // namespace

int main() {
  criterion("AC1", ac1);
  criterion("AC2", ac2);
  criterion("AC3", ac3);
  criterion("AC4", ac4);
  criterion("AC5", ac5_ac6);
  criterion("AC7", ac7);
  criterion("AC8", ac8);
  criterion("AC9", ac9);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
