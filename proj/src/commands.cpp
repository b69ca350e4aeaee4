#include "tevim/commands.hpp"

#include "tevim/error.hpp"
#include "tevim/estimands.hpp"
#include "tevim/normal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tevim {

const char* const kLearnerNotice =
    "Regressions use the built-in learners (ridge_basis, knn, boosted_trees, constant) in place of external "
    "GAM, random forest or stacked-ensemble fits. ridge_basis stands in for a smooth additive model and "
    "boosted_trees for a forest; hyperparameters are not calibrated to those tools.";

namespace {

using nlohmann::json;

json software() { return {{"name", "tevim"}, {"version", kSoftwareVersion}}; }

// NaN and infinities have no JSON form; they become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json interval(const Interval& ci) { return json::array({number(ci.lower), number(ci.upper)}); }

json scalar(const ScalarEstimate& e) {
  return {{"estimate", number(e.value)},
          {"variance", number(e.variance)},
          {"se", number(e.se)},
          {"ci", interval(e.ci)},
          {"p_value", number(e.p_value)}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k) out += sep;
    out += items[k];
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::config, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::config, "failed writing '" + path.string() + "'");
}

void make_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::config, "cannot create output directory '" + dir.string() + "': " + ec.message());
}

}  // namespace

std::string dump(const json& j) { return j.dump(2) + "\n"; }

EstimateOutput run_estimate(const EstimateConfig& cfg, int threads) {
  const auto resolved = resolve(cfg, threads);
  const auto& data = resolved.data;
  const auto& alg = resolved.algorithm;
  const bool continuous = data.mode() == TreatmentMode::continuous;
  if (continuous && resolved.config.null_test)
    fail(ErrorKind::config, "the split-sample null test is only available for binary treatment");
  const double level = resolved.config.confidence_level;

  const auto est = run_algorithm(data, alg);
  json warnings = json::array();

  json report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = "estimate";
  report["software"] = software();
  report["learner_notice"] = kLearnerNotice;
  report["config"] = to_json(resolved.config);
  report["seed"] = resolved.config.seed;
  report["n"] = data.n();
  report["p"] = data.p();
  report["mode"] = to_string(data.mode());
  report["algorithm"] = alg.algorithm.label();
  report["confidence_level"] = level;
  if (alg.algorithm.splitting == SampleSplitting::cross_fit)
    report["folds"] = {{"count", alg.folds},
                       {"stratified_by_treatment", !continuous},
                       {"note", continuous ? "folds are a seeded random partition"
                                           : "folds are a seeded random partition stratified by treatment arm"}};
  else
    report["folds"] = {{"count", 0}, {"note", "no sample splitting; all models are fitted and evaluated on the full data"}};

  const auto ate = estimate_ate(est.phi, level);
  const auto vte = estimate_vte(est.phi, est.tau, est.tau_p, level);
  json vte_json = scalar(vte.vte);
  vte_json["root"] = number(vte.root);
  vte_json["root_ci"] = interval(vte.root_ci);
  if (vte.negative) warnings.push_back("negative VTE estimate; the square root is reported as 0");
  if (continuous) {
    report["exploratory"] = true;
    report["exploratory_note"] =
        "continuous-treatment inference relies on untested rate conditions; treat intervals as exploratory";
    report["mean_lambda"] = scalar(ate);
    report["var_lambda"] = vte_json;
  } else {
    report["ate"] = scalar(ate);
    report["vte"] = vte_json;
    if (ate.value > 0.0) {
      report["lambda_bound"] = scalar(estimate_lambda_bound(est.phi, est.tau, est.tau_p, level));
      report["lambda_bound"]["note"] = "Chebyshev bound VTE / ATE^2 on the share with non-positive effect";
    } else {
      report["lambda_bound"] = nullptr;
      report["lambda_bound_note"] = "not reported: the ATE estimate is not positive";
    }
  }

  std::vector<TevimEstimate> tevims;
  for (const auto& s : alg.subsets) {
    auto t = estimate_psi(est.phi, est.tau, est.tau_for(s), est.tau_p, level);
    t.subset = s;
    tevims.push_back(std::move(t));
  }
  std::vector<std::size_t> order(tevims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return tevims[a].psi > tevims[b].psi; });

  bool degenerate = false;
  json rows = json::array();
  std::ostringstream csv;
  csv << "rank,name,covariates,theta_s,theta_p,psi,se,ci_lower,ci_upper,ci_truncated_lower,ci_truncated_upper,"
         "p_value_wald\n";
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto k = order[rank];
    const auto& t = tevims[k];
    const auto& named = resolved.subset_names[k];
    degenerate = degenerate || t.degenerate_vte;
    if (t.negative_theta_s) warnings.push_back("negative Theta_s estimate for subset '" + named.name + "'");
    rows.push_back({{"rank", rank + 1},
                    {"name", named.name},
                    {"covariates", named.covariates},
                    {"indices", t.subset.indices()},
                    {"theta_s", number(t.theta_s)},
                    {"theta_p", number(t.theta_p)},
                    {"psi", number(t.psi)},
                    {"var_psi", number(t.var_psi)},
                    {"se", number(t.se)},
                    {"ci_raw", interval(t.ci_raw)},
                    {"ci_truncated", interval(t.ci_truncated)},
                    {"p_value_wald", number(t.p_value_wald)},
                    {"n", t.n},
                    {"negative_theta_s", t.negative_theta_s},
                    {"negative_vte", t.negative_vte},
                    {"degenerate_vte", t.degenerate_vte}});
    csv << rank + 1 << ',' << csv_field(named.name) << ',' << csv_field(join(named.covariates, ',')) << ','
        << format_double(t.theta_s) << ',' << format_double(t.theta_p) << ',' << format_double(t.psi) << ','
        << format_double(t.se) << ',' << format_double(t.ci_raw.lower) << ',' << format_double(t.ci_raw.upper)
        << ',' << format_double(t.ci_truncated.lower) << ',' << format_double(t.ci_truncated.upper) << ','
        << format_double(t.p_value_wald) << '\n';
  }
  if (degenerate)
    warnings.push_back("the VTE interval reaches zero; importance ratios are poorly identified (degenerate Psi)");
  report["tevims"] = rows;
  report["wald_note"] =
      "Wald p-values are conservative when the true importance is zero; the split-sample test is the endorsed "
      "test of zero importance";

  if (resolved.config.null_test) {
    json tests = json::array();
    for (std::size_t k = 0; k < alg.subsets.size(); ++k) {
      const auto r = split_sample_null_test(data, alg, alg.subsets[k]);
      tests.push_back({{"name", resolved.subset_names[k].name},
                       {"covariates", resolved.subset_names[k].covariates},
                       {"endorsed", true},
                       {"vte_first_half", number(r.vte_first_half)},
                       {"var_tau_s_second_half", number(r.var_tau_s_second_half)},
                       {"difference", number(r.difference)},
                       {"se", number(r.se)},
                       {"statistic", number(r.statistic)},
                       {"p_value", number(r.p_value)},
                       {"n_first", r.n_first},
                       {"n_second", r.n_second}});
    }
    report["null_tests"] = tests;
  }
  report["warnings"] = warnings;
  return {std::move(report), csv.str()};
}

SimulateOutput run_simulate(const SimulateConfig& cfg, int threads) {
  const auto grid = cfg.grid(threads);
  const auto rows = monte_carlo(grid);
  const auto truth = true_values(cfg.quadrature_points);

  json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["command"] = "simulate";
  summary["software"] = software();
  summary["learner_notice"] = kLearnerNotice;
  summary["config"] = to_json(cfg);
  summary["seed"] = cfg.seed;
  summary["truths"] = {{"psi1", truth.psi1}, {"psi2", truth.psi2}, {"ate", truth.ate}, {"vte", truth.vte}};
  json cells = json::array();
  int failures = 0;
  for (const auto& r : rows) {
    failures += r.failures;
    cells.push_back({{"variant", r.variant},
                     {"learner", r.learner},
                     {"n", r.n},
                     {"subset", r.subset.to_string()},
                     {"truth", r.truth},
                     {"mean_psi", number(r.mean_psi)},
                     {"scaled_bias", number(r.scaled_bias)},
                     {"scaled_variance", number(r.scaled_variance)},
                     {"coverage", number(r.coverage)},
                     {"replicates", r.replicates},
                     {"failures", r.failures}});
  }
  summary["cells"] = cells;
  json warnings = json::array();
  if (failures > 0)
    warnings.push_back(std::to_string(failures) + " replicate fits failed and were excluded (see per-cell counts)");
  summary["warnings"] = warnings;

  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  return {std::move(summary), csv.str()};
}

json run_truths(const TruthsConfig& cfg) {
  const auto t = true_values(cfg.quadrature_points);
  return {{"schema_version", kSchemaVersion},
          {"command", "truths"},
          {"software", software()},
          {"config", to_json(cfg)},
          {"quadrature", {{"rule", "tensor-product midpoint on [-1, 1]^2"}, {"points_per_axis", t.points_per_axis}}},
          {"psi1", t.psi1},
          {"psi2", t.psi2},
          {"ate", t.ate},
          {"vte", t.vte},
          {"theta1", t.theta1},
          {"theta2", t.theta2},
          {"lambda", t.lambda}};
}

void cmd_estimate(const EstimateConfig& cfg, const RuntimeOptions& opts) {
  const auto out = run_estimate(cfg, opts.threads);
  make_out_dir(opts.out);
  write_text(opts.out / "report.json", dump(out.report));
  write_text(opts.out / "tevims.csv", out.table_csv);
}

void cmd_simulate(const SimulateConfig& cfg, const RuntimeOptions& opts) {
  const auto out = run_simulate(cfg, opts.threads);
  make_out_dir(opts.out);
  write_text(opts.out / "metrics.csv", out.metrics_csv);
  write_text(opts.out / "summary.json", dump(out.summary));
}

json cmd_truths(const TruthsConfig& cfg, const RuntimeOptions& opts) {
  auto j = run_truths(cfg);
  make_out_dir(opts.out);
  write_text(opts.out / "truths.json", dump(j));
  return j;
}

}  // namespace tevim
