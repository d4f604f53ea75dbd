// Command-line front end: simulate, fit, ebf, study, diagnose.

#include <fnmatch.h>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ebfkit/config.hpp"
#include "ebfkit/ebfkit.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitNumerical = 2;

int report_error(const std::string& message, int code) {
  std::string line = message;
  for (auto& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error: " << line << '\n';
  return code;
}

// EBFKIT_SEED, when set, wins over any --seed flag.
std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("EBFKIT_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  std::uint64_t value = 0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ebfkit::InvalidArgument("EBFKIT_SEED='" + std::string(s) + "' is not an unsigned integer");
  }
  return value;
}

std::vector<std::string> split_ids(const std::string& list) {
  std::vector<std::string> ids;
  std::stringstream ss(list);
  std::string id;
  while (std::getline(ss, id, ',')) {
    if (!id.empty()) ids.push_back(id);
  }
  return ids;
}

struct SimulateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

void cmd_simulate(const SimulateArgs& a) {
  auto config = ebfkit::read_crossed_config(a.config);
  if (a.seed) config.seed = *a.seed;
  if (auto env = seed_override()) config.seed = *env;
  ebfkit::write_dataset(a.out, ebfkit::simulate_dataset(config));
}

struct FitArgs {
  std::string data, out_draws, out_manifest;
  ebfkit::GibbsConfig gibbs;
};

void cmd_fit(FitArgs a) {
  if (auto env = seed_override()) a.gibbs.seed = *env;
  const auto data = ebfkit::read_dataset(a.data);
  const auto draws = ebfkit::gibbs_fit(data, a.gibbs);
  ebfkit::write_draws(a.out_draws, draws);
  ebfkit::write_manifest(a.out_manifest, ebfkit::crossed_manifest(data.J, data.K));
}

struct EbfArgs {
  std::string draws, manifest, out, joint;
  std::optional<std::string> variant;
  std::optional<double> ridge;
};

void cmd_ebf(const EbfArgs& a) {
  const auto manifest = ebfkit::read_manifest(a.manifest);
  const auto variant = a.variant ? ebfkit::parse_variant(*a.variant) : manifest.options.variant;
  const double ridge = a.ridge.value_or(manifest.options.ridge);
  const auto joint_ids = split_ids(a.joint);
  if (!joint_ids.empty() && variant != ebfkit::EbfVariant::PosteriorMean) {
    throw ebfkit::InvalidArgument("joint tests support only --variant mean");
  }
  for (const auto& id : joint_ids) manifest.block(id);
  const auto draws = ebfkit::read_draws(a.draws);
  auto results = ebfkit::compute_block_ebfs(draws, manifest, variant, ridge);
  if (!joint_ids.empty()) results.push_back(ebfkit::compute_joint_ebf(draws, manifest, joint_ids, ridge));
  ebfkit::write_ebf_report(a.out, results);
}

struct StudyArgs {
  std::string config, out_dir;
  std::optional<std::size_t> jobs;
};

void cmd_study(const StudyArgs& a) {
  auto config = ebfkit::read_study_config(a.config);
  if (a.jobs) {
    if (*a.jobs == 0) throw ebfkit::InvalidArgument("--jobs must be >= 1");
    config.jobs = *a.jobs;
  }
  const auto result = ebfkit::run_grid(config, a.out_dir, config.jobs);
  for (const auto& key : result.invalid) {
    std::cerr << "warning: cell " << key.label() << " has more than 10% failed replications\n";
  }
}

struct DiagnoseArgs {
  std::string draws, columns;
};

void cmd_diagnose(const DiagnoseArgs& a) {
  const auto draws = ebfkit::read_draws(a.draws);
  std::vector<std::size_t> matched;
  for (std::size_t c = 0; c < draws.columns.size(); ++c) {
    if (fnmatch(a.columns.c_str(), draws.columns[c].c_str(), 0) == 0) matched.push_back(c);
  }
  if (matched.empty()) throw ebfkit::InvalidArgument("no column matches '" + a.columns + "'");
  std::cout << "column,mean,ess\n";
  for (auto c : matched) {
    const ebfkit::Vector col = draws.values.col(static_cast<Eigen::Index>(c));
    const auto e = ebfkit::ess_by_chain(std::span<const double>(col.data(), col.size()), draws.chain_id);
    std::cout << draws.columns[c] << ',' << ebfkit::csv::format_double(col.mean()) << ','
              << ebfkit::csv::format_double(e.value) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical Bayes factors for random-effect variance components"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a cross-classified dataset");
  simulate->add_option("--config", sim.config, "Model TOML")->required();
  simulate->add_option("--out", sim.out, "Dataset CSV to write")->required();
  simulate->add_option("--seed", sim.seed, "Generator seed (overrides the config)");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Fit the crossed model by Gibbs sampling");
  fitc->add_option("--data", fit.data, "Dataset CSV")->required();
  fitc->add_option("--iters", fit.gibbs.iterations, "Total iterations")->capture_default_str();
  fitc->add_option("--burnin", fit.gibbs.burn_in, "Burn-in iterations")->capture_default_str();
  fitc->add_option("--thin", fit.gibbs.thin, "Thinning interval")->capture_default_str();
  fitc->add_option("--seed", fit.gibbs.seed, "Sampler seed")->capture_default_str();
  fitc->add_option("--out-draws", fit.out_draws, "Draws CSV to write")->required();
  fitc->add_option("--out-manifest", fit.out_manifest, "Manifest JSON to write")->required();

  EbfArgs eb;
  auto* ebf = app.add_subcommand("ebf", "Compute log EBFs from draws and a manifest");
  ebf->add_option("--draws", eb.draws, "Draws CSV")->required();
  ebf->add_option("--manifest", eb.manifest, "Manifest JSON")->required();
  ebf->add_option("--variant", eb.variant, "mean or full (default: manifest option)")
      ->check(CLI::IsMember({"mean", "full"}));
  ebf->add_option("--ridge", eb.ridge, "Ridge added to posterior covariances (default: manifest option)")
      ->check(CLI::NonNegativeNumber);
  ebf->add_option("--joint", eb.joint, "Comma-separated block ids for an additional joint test");
  ebf->add_option("--out", eb.out, "Report CSV to write")->required();

  StudyArgs st;
  auto* study = app.add_subcommand("study", "Run the simulation-study grid");
  study->add_option("--config", st.config, "Study TOML")->required();
  study->add_option("--out-dir", st.out_dir, "Output directory")->required();
  study->add_option("--jobs", st.jobs, "Worker threads (default: config)");

  DiagnoseArgs dg;
  auto* diagnose = app.add_subcommand("diagnose", "Print mean and ESS of matching draws columns");
  diagnose->add_option("--draws", dg.draws, "Draws CSV")->required();
  diagnose->add_option("--columns", dg.columns, "Shell-style glob over column names")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(e.what(), kExitUser);
  }

  try {
    if (*simulate) cmd_simulate(sim);
    if (*fitc) cmd_fit(fit);
    if (*ebf) cmd_ebf(eb);
    if (*study) cmd_study(st);
    if (*diagnose) cmd_diagnose(dg);
  } catch (const ebfkit::Error& e) {
    return report_error(e.what(), e.category() == ebfkit::ErrorCategory::Numerical ? kExitNumerical : kExitUser);
  } catch (const std::exception& e) {
    return report_error(e.what(), kExitUser);
  }
  return kExitOk;
}
