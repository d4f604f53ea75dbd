#pragma once

#include <cstdint>
#include <fstream>
#include <type_traits>
#include <set>
#include <string>
#include <vector>

#include <toml.hpp>

#include "ebfkit/crossed_model.hpp"
#include "ebfkit/errors.hpp"
#include "ebfkit/gibbs.hpp"
#include "ebfkit/study.hpp"

namespace ebfkit {

namespace detail {

inline toml::table parse_toml_file(const std::string& path) {
  if (!std::ifstream(path)) throw IoError("cannot open config '" + path + "'");
  try {
    return toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    throw ParseError(src.begin.line, src.begin.column, "in '" + path + "': " + std::string(e.description()));
  }
}

inline void reject_unknown_keys(const toml::table& t, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : t) {
    if (!known.count(std::string(k.str()))) throw ConfigError(where + ": unknown key '" + std::string(k.str()) + "'");
  }
}

inline double toml_real(const toml::table& t, const char* key, double fallback) {
  const auto node = t[key];
  if (!node) return fallback;
  if (auto v = node.value<double>()) return *v;
  throw ConfigError(std::string("key '") + key + "' must be a number");
}

inline std::uint64_t toml_count(const toml::table& t, const char* key, std::uint64_t fallback) {
  const auto node = t[key];
  if (!node) return fallback;
  if (auto v = node.value<std::int64_t>(); v && *v >= 0) return static_cast<std::uint64_t>(*v);
  throw ConfigError(std::string("key '") + key + "' must be a nonnegative integer");
}

template <typename T>
std::vector<T> toml_list(const toml::table& t, const char* key, std::vector<T> fallback) {
  const auto node = t[key];
  if (!node) return fallback;
  const auto* arr = node.as_array();
  if (!arr) throw ConfigError(std::string("key '") + key + "' must be an array");
  std::vector<T> out;
  for (const auto& el : *arr) {
    if constexpr (std::is_floating_point_v<T>) {
      auto v = el.template value<double>();
      if (!v) throw ConfigError(std::string("key '") + key + "' must hold numbers");
      out.push_back(*v);
    } else {
      auto v = el.template value<std::int64_t>();
      if (!v || *v < 0) throw ConfigError(std::string("key '") + key + "' must hold nonnegative integers");
      out.push_back(static_cast<T>(*v));
    }
  }
  return out;
}

}  // namespace detail

/// Data-generation config for `simulate`:
///   J, K, n, seed        integers
///   alpha, sigma2        reals
///   tau11, tau12, rho1   standard deviations / correlation of dimension 1
///   tau21, tau22, rho2   same for dimension 2
inline CrossedModelConfig crossed_config_from_toml(const toml::table& t) {
  detail::reject_unknown_keys(
      t, {"J", "K", "n", "seed", "alpha", "sigma2", "tau11", "tau12", "rho1", "tau21", "tau22", "rho2"},
      "simulate config");
  CrossedModelConfig c;
  c.J = detail::toml_count(t, "J", c.J);
  c.K = detail::toml_count(t, "K", c.K);
  c.n = detail::toml_count(t, "n", c.n);
  c.seed = detail::toml_count(t, "seed", c.seed);
  c.alpha = detail::toml_real(t, "alpha", c.alpha);
  c.sigma2 = detail::toml_real(t, "sigma2", c.sigma2);
  c.dim1 = {detail::toml_real(t, "tau11", c.dim1.tau1), detail::toml_real(t, "tau12", c.dim1.tau2),
            detail::toml_real(t, "rho1", c.dim1.rho)};
  c.dim2 = {detail::toml_real(t, "tau21", c.dim2.tau1), detail::toml_real(t, "tau22", c.dim2.tau2),
            detail::toml_real(t, "rho2", c.dim2.rho)};
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline CrossedModelConfig read_crossed_config(const std::string& path) {
  return crossed_config_from_toml(detail::parse_toml_file(path));
}

/// Study config: top-level keys mirror SimStudyConfig, sampler settings
/// live in an optional [gibbs] table (iterations, burn_in, thin).
inline SimStudyConfig study_config_from_toml(const toml::table& t) {
  detail::reject_unknown_keys(t,
                              {"tau11_grid", "J_list", "n_list", "K", "alpha", "sigma2", "rho1", "rho2", "tau12",
                               "tau21", "tau22", "replications", "master_seed", "jobs", "gibbs"},
                              "study config");
  SimStudyConfig c;
  c.tau11_grid = detail::toml_list<double>(t, "tau11_grid", c.tau11_grid);
  c.J_list = detail::toml_list<std::size_t>(t, "J_list", c.J_list);
  c.n_list = detail::toml_list<std::size_t>(t, "n_list", c.n_list);
  c.K = detail::toml_count(t, "K", c.K);
  c.alpha = detail::toml_real(t, "alpha", c.alpha);
  c.sigma2 = detail::toml_real(t, "sigma2", c.sigma2);
  c.rho1 = detail::toml_real(t, "rho1", c.rho1);
  c.rho2 = detail::toml_real(t, "rho2", c.rho2);
  c.tau12 = detail::toml_real(t, "tau12", c.tau12);
  c.tau21 = detail::toml_real(t, "tau21", c.tau21);
  c.tau22 = detail::toml_real(t, "tau22", c.tau22);
  c.replications = detail::toml_count(t, "replications", c.replications);
  c.master_seed = detail::toml_count(t, "master_seed", c.master_seed);
  c.jobs = detail::toml_count(t, "jobs", c.jobs);
  if (const auto node = t["gibbs"]) {
    const auto* g = node.as_table();
    if (!g) throw ConfigError("'gibbs' must be a table");
    detail::reject_unknown_keys(*g, {"iterations", "burn_in", "thin"}, "study config [gibbs]");
    c.gibbs.iterations = detail::toml_count(*g, "iterations", c.gibbs.iterations);
    c.gibbs.burn_in = detail::toml_count(*g, "burn_in", c.gibbs.burn_in);
    c.gibbs.thin = detail::toml_count(*g, "thin", c.gibbs.thin);
  }
  c.validate();
  return c;
}

inline SimStudyConfig read_study_config(const std::string& path) {
  return study_config_from_toml(detail::parse_toml_file(path));
}

}  // namespace ebfkit
