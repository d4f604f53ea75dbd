#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ebfkit/crossed_model.hpp"
#include "ebfkit/csv.hpp"
#include "ebfkit/ebf.hpp"
#include "ebfkit/gibbs.hpp"
#include "ebfkit/numeric.hpp"
#include "ebfkit/posterior.hpp"
#include "ebfkit/sampling.hpp"

namespace ebfkit {

/// One design point of the study grid.
struct CellKey {
  double tau11 = 0.0;
  std::size_t J = 0;
  std::size_t n = 0;

  std::string label() const {
    return "tau11-" + csv::format_shortest(tau11) + "_J-" + std::to_string(J) + "_n-" + std::to_string(n);
  }
};

/// Design grid of the crossed-model simulation study. Only tau11 (the
/// standard deviation of theta11), J and n vary; everything else is fixed.
struct SimStudyConfig {
  std::vector<double> tau11_grid{0.00, 0.03, 0.07, 0.13, 0.20, 0.29, 0.40, 0.55, 0.75, 0.80};
  std::vector<std::size_t> J_list{10, 30, 100};
  std::vector<std::size_t> n_list{10, 30, 100};
  std::size_t K = 20;
  double alpha = 0.0;
  double sigma2 = 1.0;
  double rho1 = 0.3;
  double rho2 = 0.3;
  double tau12 = 0.5;
  double tau21 = 0.5;
  double tau22 = 0.0;
  std::size_t replications = 200;
  GibbsConfig gibbs{};
  std::uint64_t master_seed = 20240101;
  std::size_t jobs = 1;

  void validate() const {
    if (tau11_grid.empty() || J_list.empty() || n_list.empty()) throw ConfigError("study grids must be nonempty");
    if (replications < 20) throw ConfigError("replications must be >= 20");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    for (double t : tau11_grid) {
      if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("tau11 grid values must be finite and >= 0");
    }
    for (auto j : J_list) {
      if (j < kMinClusters) throw ConfigError("every J must be >= " + std::to_string(kMinClusters));
    }
    if (K < kMinClusters) throw ConfigError("K must be >= " + std::to_string(kMinClusters));
    for (auto n : n_list) {
      if (n < 1) throw ConfigError("every n must be >= 1");
    }
    try {
      gibbs.validate();
      model({tau11_grid.front(), J_list.front(), n_list.front()}, 0).validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }

  CrossedModelConfig model(const CellKey& key, std::uint64_t seed) const {
    CrossedModelConfig m;
    m.J = key.J;
    m.K = K;
    m.n = key.n;
    m.alpha = alpha;
    m.sigma2 = sigma2;
    m.dim1 = {key.tau11, tau12, rho1};
    m.dim2 = {tau21, tau22, rho2};
    m.seed = seed;
    return m;
  }
};

/// Grid cells in output order: tau11 outermost, then J, then n.
inline std::vector<CellKey> grid_cells(const SimStudyConfig& config) {
  std::vector<CellKey> cells;
  for (double t : config.tau11_grid) {
    for (auto j : config.J_list) {
      for (auto n : config.n_list) cells.push_back({t, j, n});
    }
  }
  return cells;
}

inline constexpr std::array<const char*, 4> kCrossedBlocks{"theta_11", "theta_12", "theta_21", "theta_22"};
inline constexpr std::array<EbfVariant, 2> kVariants{EbfVariant::PosteriorMean, EbfVariant::FullPosterior};
inline constexpr std::array<const char*, 6> kPsiColumns{"psi1_11", "psi1_12", "psi1_22",
                                                        "psi2_11", "psi2_12", "psi2_22"};

/// Outcome of one simulated dataset.
struct ReplicationResult {
  bool ok = false;
  std::string error;
  /// log EBF01 indexed [block][variant].
  std::array<std::array<double, 2>, 4> log_ebf{};
  /// Posterior means of the six Psi entries.
  std::array<double, 6> psi_mean{};
};

struct BlockVariantStats {
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  /// Fraction of successful replications with log EBF01 < 0.
  double select_full = 0.0;
};

struct CellSummary {
  CellKey key;
  std::size_t replications = 0;
  std::size_t failures = 0;
  std::array<std::array<BlockVariantStats, 2>, 4> stats{};
  /// Quantiles, mean and minimum of the posterior mean of psi1_11.
  double psi11_q05 = 0.0, psi11_q50 = 0.0, psi11_q95 = 0.0, psi11_mean = 0.0, psi11_min = 0.0;
  std::vector<ReplicationResult> raw;
};

/// Fraction of failed replications beyond which a cell is invalid.
inline constexpr double kMaxFailureFraction = 0.10;

inline ReplicationResult run_replication(const SimStudyConfig& config, const CellKey& key, std::size_t rep) {
  ReplicationResult r;
  try {
    const auto data = simulate_dataset(config.model(key, stream_seed(config.master_seed, rep, 1)));
    GibbsConfig g = config.gibbs;
    g.seed = stream_seed(config.master_seed, rep, 2);
    const auto draws = gibbs_fit(data, g);
    const auto manifest = crossed_manifest(key.J, config.K);
    for (std::size_t b = 0; b < manifest.blocks.size(); ++b) {
      const auto summary = summarize_block(draws, manifest.blocks[b], 0.0);
      for (std::size_t v = 0; v < kVariants.size(); ++v) {
        r.log_ebf[b][v] = log_ebf(summary.effects, manifest.blocks[b].structure, summary.tau(kVariants[v])).log_ebf01;
      }
    }
    for (std::size_t p = 0; p < kPsiColumns.size(); ++p) r.psi_mean[p] = draws.column(kPsiColumns[p]).mean();
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

/// Runs every replication of one cell on `jobs` threads. Replication r uses
/// streams derived from (master seed, r) only, so results do not depend on
/// scheduling. Throws StudyCellInvalid when more than 10% of replications
/// fail.
inline CellSummary run_cell(const SimStudyConfig& config, const CellKey& key, std::size_t jobs = 0) {
  config.validate();
  if (jobs == 0) jobs = config.jobs;
  const std::size_t reps = config.replications;
  CellSummary out;
  out.key = key;
  out.replications = reps;
  out.raw.resize(reps);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) out.raw[r] = run_replication(config, key, r);
  };
  const std::size_t threads = std::min(jobs, reps);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::array<std::array<std::vector<double>, 2>, 4> values;
  std::vector<double> psi11;
  for (const auto& r : out.raw) {
    if (!r.ok) {
      ++out.failures;
      continue;
    }
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t v = 0; v < 2; ++v) values[b][v].push_back(r.log_ebf[b][v]);
    }
    psi11.push_back(r.psi_mean[0]);
  }
  if (static_cast<double>(out.failures) > kMaxFailureFraction * static_cast<double>(reps)) {
    std::string first_error;
    for (const auto& r : out.raw) {
      if (!r.ok) {
        first_error = r.error;
        break;
      }
    }
    throw StudyCellInvalid("cell " + key.label() + ": " + std::to_string(out.failures) + " of " +
                           std::to_string(reps) + " replications failed (first: " + first_error + ")");
  }
  const double probs[] = {0.05, 0.50, 0.95};
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t v = 0; v < 2; ++v) {
      const auto& vals = values[b][v];
      const auto q = quantiles(vals, probs);
      auto& s = out.stats[b][v];
      s.q05 = q[0];
      s.q50 = q[1];
      s.q95 = q[2];
      s.select_full = static_cast<double>(std::count_if(vals.begin(), vals.end(), [](double x) { return x < 0.0; })) /
                      static_cast<double>(vals.size());
    }
  }
  const auto q = quantiles(psi11, probs);
  out.psi11_q05 = q[0];
  out.psi11_q50 = q[1];
  out.psi11_q95 = q[2];
  double sum = 0.0;
  for (double p : psi11) sum += p;
  out.psi11_mean = sum / static_cast<double>(psi11.size());
  out.psi11_min = *std::min_element(psi11.begin(), psi11.end());
  return out;
}

inline constexpr const char* kCellsHeader = "tau11,J,n,block,variant,statistic,value";

namespace detail {

inline void write_cell_rows(std::ostream& out, const CellSummary& c) {
  const std::string prefix =
      csv::format_shortest(c.key.tau11) + "," + std::to_string(c.key.J) + "," + std::to_string(c.key.n) + ",";
  auto row = [&](const std::string& block, const std::string& variant, const char* stat, double value) {
    out << prefix << block << ',' << variant << ',' << stat << ',' << csv::format_double(value) << '\n';
  };
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t v = 0; v < 2; ++v) {
      const auto& s = c.stats[b][v];
      const char* variant = to_string(kVariants[v]);
      row(kCrossedBlocks[b], variant, "q05", s.q05);
      row(kCrossedBlocks[b], variant, "q50", s.q50);
      row(kCrossedBlocks[b], variant, "q95", s.q95);
      row(kCrossedBlocks[b], variant, "select_full", s.select_full);
    }
  }
  row("psi1_11", "posterior_mean", "postmean_q05", c.psi11_q05);
  row("psi1_11", "posterior_mean", "postmean_q50", c.psi11_q50);
  row("psi1_11", "posterior_mean", "postmean_q95", c.psi11_q95);
  row("psi1_11", "posterior_mean", "postmean_mean", c.psi11_mean);
  row("psi1_11", "posterior_mean", "postmean_min", c.psi11_min);
  row("all", "none", "replications", static_cast<double>(c.replications));
  row("all", "none", "failures", static_cast<double>(c.failures));
}

inline void write_invalid_cell_rows(std::ostream& out, const CellKey& key, std::size_t replications) {
  out << csv::format_shortest(key.tau11) << ',' << key.J << ',' << key.n << ",all,none,invalid,1\n";
  out << csv::format_shortest(key.tau11) << ',' << key.J << ',' << key.n << ",all,none,replications,"
      << replications << '\n';
}

}  // namespace detail

/// Per-replication log EBFs of one cell, for re-plotting.
inline void write_raw_cell(const std::string& path, const CellSummary& c) {
  auto out = csv::open_output(path);
  out << "replication,status";
  for (const char* b : kCrossedBlocks) {
    for (EbfVariant v : kVariants) out << ',' << b << '_' << to_string(v);
  }
  for (const char* p : kPsiColumns) out << ',' << p << "_postmean";
  out << '\n';
  for (std::size_t r = 0; r < c.raw.size(); ++r) {
    const auto& rep = c.raw[r];
    out << r << ',' << (rep.ok ? "ok" : "failed");
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t v = 0; v < 2; ++v) out << ',' << (rep.ok ? csv::format_double(rep.log_ebf[b][v]) : "NA");
    }
    for (double p : rep.psi_mean) out << ',' << (rep.ok ? csv::format_double(p) : "NA");
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

struct GridResult {
  std::vector<CellSummary> cells;
  std::vector<CellKey> invalid;
};

/// Runs every grid cell and writes `cells.csv` (long format, rewritten
/// after each cell so an interrupted run keeps its finished cells) and one
/// `raw_logebf_<cell>.csv` per valid cell into `out_dir`.
inline GridResult run_grid(const SimStudyConfig& config, const std::string& out_dir, std::size_t jobs = 0) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  const auto cells_path = (std::filesystem::path(out_dir) / "cells.csv").string();
  GridResult result;
  std::string body;
  for (const auto& key : grid_cells(config)) {
    std::ostringstream rows;
    try {
      auto cell = run_cell(config, key, jobs);
      write_raw_cell((std::filesystem::path(out_dir) / ("raw_logebf_" + key.label() + ".csv")).string(), cell);
      detail::write_cell_rows(rows, cell);
      result.cells.push_back(std::move(cell));
    } catch (const StudyCellInvalid&) {
      detail::write_invalid_cell_rows(rows, key, config.replications);
      result.invalid.push_back(key);
    }
    body += rows.str();
    auto out = csv::open_output(cells_path);
    out << kCellsHeader << '\n' << body;
    if (!out) throw IoError("failed writing '" + cells_path + "'");
  }
  return result;
}

}  // namespace ebfkit
