#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ebfkit/covstruct.hpp"
#include "ebfkit/draws.hpp"
#include "ebfkit/ebf.hpp"
#include "ebfkit/errors.hpp"

namespace ebfkit {

/// One tested block: which draws columns hold its random effects, its prior
/// covariance structure, and which columns hold each structure slot.
struct ManifestBlock {
  std::string id;
  std::vector<std::string> effects;
  CovarianceStructure structure;
  std::map<std::string, std::string> slots;
};

struct ManifestOptions {
  double ridge = 0.0;
  EbfVariant variant = EbfVariant::PosteriorMean;
};

struct BlockManifest {
  std::vector<ManifestBlock> blocks;
  ManifestOptions options;

  const ManifestBlock& block(const std::string& id) const {
    for (const auto& b : blocks) {
      if (b.id == id) return b;
    }
    throw InvalidArgument("manifest has no block '" + id + "'");
  }
};

namespace detail {

using json = nlohmann::json;

inline const json& require_key(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(where + ": missing key '" + key + "'");
  }
  return obj.at(key);
}

template <typename T>
T json_as(const json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json structure_to_json(const CovarianceStructure& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind());
  j["dim"] = s.dim();
  switch (s.kind()) {
    case StructureKind::Diagonal: {
      auto ranges = nlohmann::json::array();
      for (const auto& r : s.ranges()) ranges.push_back({{"slot", r.slot}, {"begin", r.begin}, {"end", r.end}});
      j["ranges"] = ranges;
      break;
    }
    case StructureKind::ScaledIdentity:
    case StructureKind::Car:
      j["slot"] = s.slots().front();
      break;
    case StructureKind::BlockKronecker:
      j["block_dim"] = s.block_dim();
      j["replications"] = s.replications();
      j["slots"] = s.slots();
      break;
    case StructureKind::DenseSymmetric:
      j["slots"] = s.slots();
      break;
  }
  if (s.kind() == StructureKind::Car) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < s.weights().rows(); ++r) {
      std::vector<double> row(s.weights().cols());
      for (Eigen::Index c = 0; c < s.weights().cols(); ++c) row[c] = s.weights()(r, c);
      rows.push_back(row);
    }
    j["weights"] = rows;
    j["b"] = std::vector<double>(s.car_b().data(), s.car_b().data() + s.car_b().size());
  }
  return j;
}

inline CovarianceStructure structure_from_json(const nlohmann::json& j, const std::string& where) {
  using detail::json_as;
  using detail::require_key;
  const auto kind = json_as<std::string>(require_key(j, "kind", where), where + ".kind");
  auto opt_slots = [&]() {
    return j.contains("slots") ? json_as<std::vector<std::string>>(j.at("slots"), where + ".slots")
                               : std::vector<std::string>{};
  };
  auto opt_slot = [&]() {
    return j.contains("slot") ? json_as<std::string>(j.at("slot"), where + ".slot") : std::string("variance");
  };
  auto check_dim = [&](const CovarianceStructure& s) {
    if (j.contains("dim") && json_as<std::size_t>(j.at("dim"), where + ".dim") != s.dim()) {
      throw ConfigError(where + ": declared dim " + j.at("dim").dump() + " does not match structure dim " +
                        std::to_string(s.dim()));
    }
    return s;
  };
  try {
    if (kind == "scaled_identity") {
      return CovarianceStructure::scaled_identity(json_as<std::size_t>(require_key(j, "dim", where), where + ".dim"),
                                                  opt_slot());
    }
    if (kind == "diagonal") {
      if (j.contains("ranges")) {
        std::vector<DiagonalRange> ranges;
        for (const auto& r : j.at("ranges")) {
          ranges.push_back({json_as<std::string>(require_key(r, "slot", where), where + ".ranges.slot"),
                            json_as<std::size_t>(require_key(r, "begin", where), where + ".ranges.begin"),
                            json_as<std::size_t>(require_key(r, "end", where), where + ".ranges.end")});
        }
        return CovarianceStructure::diagonal(json_as<std::size_t>(require_key(j, "dim", where), where + ".dim"),
                                             std::move(ranges));
      }
      return check_dim(CovarianceStructure::diagonal(
          json_as<std::vector<std::string>>(require_key(j, "slots", where), where + ".slots")));
    }
    if (kind == "block_kronecker") {
      return check_dim(CovarianceStructure::block_kronecker(
          json_as<std::size_t>(require_key(j, "block_dim", where), where + ".block_dim"),
          json_as<std::size_t>(require_key(j, "replications", where), where + ".replications"), opt_slots()));
    }
    if (kind == "dense_symmetric") {
      return CovarianceStructure::dense_symmetric(
          json_as<std::size_t>(require_key(j, "dim", where), where + ".dim"), opt_slots());
    }
    if (kind == "car") {
      const auto rows = json_as<std::vector<std::vector<double>>>(require_key(j, "weights", where), where + ".weights");
      const auto b = json_as<std::vector<double>>(require_key(j, "b", where), where + ".b");
      Matrix w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw ConfigError(where + ".weights must be square");
        for (std::size_t c = 0; c < rows.size(); ++c) w(r, c) = rows[r][c];
      }
      return check_dim(CovarianceStructure::car(std::move(w), Eigen::Map<const Vector>(b.data(), b.size()), opt_slot()));
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const DimensionMismatch& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown structure kind '" + kind + "'");
}

inline nlohmann::json manifest_to_json(const BlockManifest& m) {
  nlohmann::json j;
  auto blocks = nlohmann::json::array();
  for (const auto& b : m.blocks) {
    nlohmann::json slots = nlohmann::json::object();
    for (const auto& [slot, col] : b.slots) slots[slot] = col;
    blocks.push_back({{"id", b.id}, {"effects", b.effects}, {"structure", structure_to_json(b.structure)}, {"slots", slots}});
  }
  j["blocks"] = blocks;
  j["options"] = {{"ridge", m.options.ridge}, {"variant", to_string(m.options.variant)}};
  return j;
}

/// Parses a manifest and checks its internal consistency: every block's
/// effect count matches its structure, slot bindings cover exactly the
/// structure's slots, and no effect column belongs to two blocks.
inline BlockManifest manifest_from_json(const nlohmann::json& j) {
  using detail::json_as;
  using detail::require_key;
  BlockManifest m;
  const auto& blocks = require_key(j, "blocks", "manifest");
  if (!blocks.is_array()) throw ConfigError("manifest.blocks must be an array");
  std::set<std::string> ids;
  std::set<std::string> effect_columns;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& bj = blocks[i];
    const std::string where = "manifest.blocks[" + std::to_string(i) + "]";
    auto id = json_as<std::string>(require_key(bj, "id", where), where + ".id");
    if (!ids.insert(id).second) throw ConfigError(where + ": duplicate block id '" + id + "'");
    auto effects = json_as<std::vector<std::string>>(require_key(bj, "effects", where), where + ".effects");
    auto structure = structure_from_json(require_key(bj, "structure", where), where + ".structure");
    auto slots = json_as<std::map<std::string, std::string>>(require_key(bj, "slots", where), where + ".slots");
    if (effects.size() != structure.dim()) {
      throw ConfigError(where + ": " + std::to_string(effects.size()) + " effect columns but structure dim " +
                        std::to_string(structure.dim()));
    }
    for (const auto& e : effects) {
      if (!effect_columns.insert(e).second) {
        throw ConfigError(where + ": effect column '" + e + "' is already used by another block");
      }
    }
    for (const auto& s : structure.slots()) {
      if (!slots.count(s)) throw ConfigError(where + ": structure slot '" + s + "' has no column binding");
    }
    if (slots.size() != structure.slots().size()) {
      for (const auto& [s, col] : slots) {
        const auto& declared = structure.slots();
        if (std::find(declared.begin(), declared.end(), s) == declared.end()) {
          throw ConfigError(where + ": slot '" + s + "' is not declared by the structure");
        }
      }
    }
    m.blocks.push_back({std::move(id), std::move(effects), std::move(structure), std::move(slots)});
  }
  if (j.contains("options")) {
    const auto& o = j.at("options");
    if (o.contains("ridge")) m.options.ridge = json_as<double>(o.at("ridge"), "manifest.options.ridge");
    if (o.contains("variant")) {
      try {
        m.options.variant = parse_variant(json_as<std::string>(o.at("variant"), "manifest.options.variant"));
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("manifest.options.variant: ") + e.what());
      }
    }
    if (!(m.options.ridge >= 0.0)) throw ConfigError("manifest.options.ridge must be nonnegative");
  }
  return m;
}

inline BlockManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

inline void write_manifest(const std::string& path, const BlockManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Checks that every column a manifest refers to exists in the draws.
inline void validate_manifest(const BlockManifest& m, const DrawsMatrix& draws) {
  for (const auto& b : m.blocks) {
    for (const auto& e : b.effects) {
      if (!draws.find(e)) throw MissingColumn("block '" + b.id + "': effect column '" + e + "' not in draws");
    }
    for (const auto& [slot, col] : b.slots) {
      if (!draws.find(col)) {
        throw MissingColumn("block '" + b.id + "': slot '" + slot + "' column '" + col + "' not in draws");
      }
    }
  }
}

}  // namespace ebfkit
