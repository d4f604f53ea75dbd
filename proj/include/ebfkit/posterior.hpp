#pragma once

#include <span>
#include <string>
#include <vector>

#include "ebfkit/draws.hpp"
#include "ebfkit/ebf.hpp"
#include "ebfkit/linalg.hpp"
#include "ebfkit/manifest.hpp"

namespace ebfkit {

/// Everything one block contributes to an EBF: the Gaussian summary of its
/// effects plus both forms of variance-component information.
struct BlockSummary {
  RandomEffectSummary effects;
  VarianceParams tau_point;
  std::vector<VarianceParams> tau_draws;
  double ridge = 0.0;

  TauPosterior tau(EbfVariant variant) const {
    return variant == EbfVariant::PosteriorMean ? TauPosterior::point(tau_point) : TauPosterior::draws(tau_draws);
  }
};

/// Column means and unbiased (divisor S - 1) sample covariance of the
/// named columns.
inline std::pair<Vector, Matrix> sample_moments(const DrawsMatrix& draws, std::span<const std::string> columns) {
  const auto s = static_cast<Eigen::Index>(draws.rows());
  if (s < 2) throw EmptyDraws("sample covariance needs at least 2 draws");
  Matrix x(s, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    x.col(static_cast<Eigen::Index>(c)) = draws.values.col(static_cast<Eigen::Index>(draws.index_of(columns[c])));
  }
  Vector mean = x.colwise().mean().transpose();
  x.rowwise() -= mean.transpose();
  Matrix cov = (x.transpose() * x) / static_cast<double>(s - 1);
  return {std::move(mean), symmetrize(cov)};
}

inline BlockSummary summarize_block(const DrawsMatrix& draws, const ManifestBlock& block, double ridge) {
  BlockSummary out;
  out.ridge = ridge;
  auto [mean, cov] = sample_moments(draws, block.effects);
  try {
    cov = validate_pd(cov, ridge);
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite("block '" + block.id + "': posterior covariance of the effects is not positive "
                              "definite (ridge " + std::to_string(ridge) + ")");
  }
  out.effects = {block.id, std::move(mean), std::move(cov), draws.rows()};

  std::vector<std::pair<std::string, std::size_t>> slot_cols;
  for (const auto& slot : block.structure.slots()) {
    const auto it = block.slots.find(slot);
    if (it == block.slots.end()) throw MissingSlot("block '" + block.id + "': slot '" + slot + "' is unbound");
    slot_cols.emplace_back(slot, draws.index_of(it->second));
  }
  out.tau_draws.resize(draws.rows());
  for (const auto& [slot, col] : slot_cols) {
    const auto column = draws.values.col(static_cast<Eigen::Index>(col));
    out.tau_point.set(slot, column.mean());
    for (std::size_t r = 0; r < draws.rows(); ++r) out.tau_draws[r].set(slot, column(static_cast<Eigen::Index>(r)));
  }
  return out;
}

/// Per-block EBFs in manifest order.
inline std::vector<EbfResult> compute_block_ebfs(const DrawsMatrix& draws, const BlockManifest& manifest,
                                                 EbfVariant variant, double ridge) {
  validate_manifest(manifest, draws);
  std::vector<EbfResult> results;
  results.reserve(manifest.blocks.size());
  for (const auto& block : manifest.blocks) {
    const auto summary = summarize_block(draws, block, ridge);
    auto r = log_ebf(summary.effects, block.structure, summary.tau(variant));
    r.notes.ridge = ridge;
    results.push_back(std::move(r));
  }
  return results;
}

/// Joint EBF over the listed blocks: effect columns are stacked in the
/// listed order and their pooled posterior covariance feeds the numerator.
inline EbfResult compute_joint_ebf(const DrawsMatrix& draws, const BlockManifest& manifest,
                                   std::span<const std::string> block_ids, double ridge) {
  validate_manifest(manifest, draws);
  std::vector<std::string> columns;
  std::vector<JointBlock> blocks;
  for (const auto& id : block_ids) {
    const auto& b = manifest.block(id);
    columns.insert(columns.end(), b.effects.begin(), b.effects.end());
    blocks.push_back({b.id, b.structure, summarize_block(draws, b, ridge).tau_point});
  }
  const auto [mean, cov] = sample_moments(draws, columns);
  return log_ebf_joint(blocks, mean, cov, ridge);
}

}  // namespace ebfkit
