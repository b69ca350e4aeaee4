// tevim command-line interface: estimate | simulate | truths.

#include "tevim/commands.hpp"
#include "tevim/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct SharedFlags {
  std::string config;
  std::optional<std::string> algorithm;
  std::optional<int> folds;
  std::optional<std::uint64_t> seed;
  std::optional<double> clip;
  std::optional<std::string> subsets;
  std::optional<std::string> mode;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_shared(CLI::App& app, SharedFlags& f) {
  app.add_option("--config", f.config, "JSON config file");
  app.add_option("--algorithm", f.algorithm, "1A, 1B, 2A or 2B");
  app.add_option("--folds", f.folds, "cross-fitting folds K");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--clip", f.clip, "propensity clip in (0, 0.5)");
  app.add_option("--threads", f.threads, "worker threads");
  app.add_option("--out", f.out, "output directory");
}

nlohmann::json load_config(const std::string& path) {
  return path.empty() ? nlohmann::json::object() : tevim::read_json_file(path);
}

tevim::RuntimeOptions runtime(const nlohmann::json& file, const SharedFlags& f) {
  auto opts = tevim::runtime_options_from_json(file);
  if (f.out) opts.out = *f.out;
  if (f.threads) {
    if (*f.threads < 1) tevim::fail(tevim::ErrorKind::config, "--threads must be at least 1");
    opts.threads = *f.threads;
  }
  return opts;
}

int report_error(const tevim::Error& e) {
  nlohmann::json j = {{"error", {{"kind", e.kind_name()}, {"message", e.what()}, {"exit_code", e.exit_code()}}}};
  std::cerr << j.dump() << '\n';
  return e.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment-effect variable importance estimation"};
  app.require_subcommand(1);

  SharedFlags est_flags;
  std::optional<std::string> data_path, outcome, treatment, covariates;
  std::optional<double> level;
  bool null_test = false;
  auto* estimate = app.add_subcommand("estimate", "estimate TE-VIMs from a CSV file");
  add_shared(*estimate, est_flags);
  estimate->add_option("--subsets", est_flags.subsets, "subsets, e.g. \"x1;x2;grp=x1,x2\"");
  estimate->add_option("--mode", est_flags.mode, "binary or continuous");
  estimate->add_option("--data", data_path, "input CSV");
  estimate->add_option("--outcome", outcome, "outcome column");
  estimate->add_option("--treatment", treatment, "treatment column");
  estimate->add_option("--covariates", covariates, "comma-separated covariate columns (default: all others)");
  estimate->add_option("--level", level, "confidence level");
  estimate->add_flag("--null-test", null_test, "run the split-sample zero-importance test per subset");

  SharedFlags sim_flags;
  std::optional<std::string> sizes, algorithms, learners;
  std::optional<int> replicates;
  bool full = false;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on the built-in two-covariate model");
  add_shared(*simulate, sim_flags);
  simulate->add_option("--sizes", sizes, "comma-separated sample sizes");
  simulate->add_option("--algorithms", algorithms, "comma-separated variants, e.g. 1A,2B");
  simulate->add_option("--learners", learners, "comma-separated presets: ridge_basis, boosted_trees");
  simulate->add_option("--replicates", replicates, "replicates per cell");
  simulate->add_flag("--full", full, "1000 replicates over n in {500,1000,2000,3000,4000}");

  SharedFlags truth_flags;
  std::optional<int> points;
  auto* truths = app.add_subcommand("truths", "true estimand values of the built-in model");
  truths->add_option("--config", truth_flags.config, "JSON config file");
  truths->add_option("--out", truth_flags.out, "output directory");
  truths->add_option("--points", points, "quadrature points per axis (>= 1000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (estimate->parsed()) {
      const auto file = load_config(est_flags.config);
      auto cfg = tevim::estimate_config_from_json(file);
      if (est_flags.algorithm) cfg.algorithm = tevim::Algorithm::parse(*est_flags.algorithm);
      if (est_flags.folds) cfg.folds = *est_flags.folds;
      if (est_flags.seed) cfg.seed = *est_flags.seed;
      if (est_flags.clip) cfg.clip = *est_flags.clip;
      if (est_flags.subsets) cfg.subsets = tevim::parse_subset_list(*est_flags.subsets);
      if (est_flags.mode) cfg.data.mode = tevim::parse_treatment_mode(*est_flags.mode);
      if (data_path) cfg.data.path = *data_path;
      if (outcome) cfg.data.outcome = *outcome;
      if (treatment) cfg.data.treatment = *treatment;
      if (covariates) {
        cfg.data.covariates.clear();
        std::string item;
        std::istringstream in(*covariates);
        while (std::getline(in, item, ',')) cfg.data.covariates.push_back(item);
      }
      if (level) cfg.confidence_level = *level;
      if (null_test) cfg.null_test = true;
      // Re-validate after flag overrides.
      cfg = tevim::estimate_config_from_json(tevim::to_json(cfg));
      const auto opts = runtime(file, est_flags);
      tevim::cmd_estimate(cfg, opts);
      std::cout << "wrote " << (opts.out / "report.json").string() << " and " << (opts.out / "tevims.csv").string()
                << '\n';
    } else if (simulate->parsed()) {
      const auto file = load_config(sim_flags.config);
      auto j = file;
      if (full) j["full"] = true;
      if (sizes) {
        std::vector<std::int64_t> values;
        std::string item;
        std::istringstream in(*sizes);
        while (std::getline(in, item, ',')) {
          try {
            values.push_back(std::stoll(item));
          } catch (const std::exception&) {
            tevim::fail(tevim::ErrorKind::config, "invalid size '" + item + "'");
          }
        }
        j["sizes"] = values;
      }
      auto split = [](const std::string& text) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream in(text);
        while (std::getline(in, item, ',')) out.push_back(item);
        return out;
      };
      if (algorithms) j["algorithms"] = split(*algorithms);
      if (learners) j["learners"] = split(*learners);
      if (replicates) j["replicates"] = *replicates;
      if (sim_flags.algorithm) j["algorithms"] = {*sim_flags.algorithm};
      if (sim_flags.folds) j["folds"] = *sim_flags.folds;
      if (sim_flags.seed) j["seed"] = *sim_flags.seed;
      if (sim_flags.clip) j["clip"] = *sim_flags.clip;
      const auto cfg = tevim::simulate_config_from_json(j);
      const auto opts = runtime(file, sim_flags);
      tevim::cmd_simulate(cfg, opts);
      std::cout << "wrote " << (opts.out / "metrics.csv").string() << " and " << (opts.out / "summary.json").string()
                << '\n';
    } else if (truths->parsed()) {
      const auto file = load_config(truth_flags.config);
      auto cfg = tevim::truths_config_from_json(file);
      if (points) cfg.quadrature_points = *points;
      cfg = tevim::truths_config_from_json(tevim::to_json(cfg));
      std::cout << tevim::dump(tevim::cmd_truths(cfg, runtime(file, truth_flags)));
    }
  } catch (const tevim::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    return report_error(tevim::Error(tevim::ErrorKind::numeric, e.what()));
  }
  return 0;
}
