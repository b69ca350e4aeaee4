#include "tevim/crossfit.hpp"
#include "tevim/data.hpp"
#include "tevim/estimands.hpp"
#include "tevim/simulation.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

using namespace tevim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::absolute("cli_work");

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::string& args) {
  fs::create_directories(kWork);
  const auto out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string("\"") + TEVIM_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

fs::path study_csv() {
  const auto path = kWork / "study.csv";
  if (!fs::exists(path)) {
    fs::create_directories(kWork);
    std::ofstream out(path);
    write_csv(out, generate_dgp(400, 17).data, "y", "a");
  }
  return path;
}

json error_object(const Run& r) {
  const auto j = json::parse(r.err);
  REQUIRE(j.contains("error"));
  return j.at("error");
}

}  // namespace

TEST_CASE("estimate: the report matches the library call bit for bit") {
  const auto csv = study_csv();
  const auto out = kWork / "est_lib";
  const auto r = cli("estimate --data \"" + csv.string() + "\" --algorithm 2B --folds 5 --seed 3 --out \"" +
                     out.string() + "\"");
  REQUIRE(r.code == 0);
  const auto report = json::parse(slurp(out / "report.json"));

  AlgorithmConfig cfg;
  cfg.algorithm = Algorithm::parse("2B");
  cfg.folds = 5;
  cfg.seed = 3;
  cfg.subsets = {CovariateSubset({1}, 2), CovariateSubset({2}, 2)};
  const auto data = load_csv(csv, "y", "a", {"x1", "x2"});
  const auto est = run_algorithm(data, cfg);
  const auto psi1 = estimate_psi(est.phi, est.tau, est.tau_for(cfg.subsets[0]), est.tau_p);
  const auto psi2 = estimate_psi(est.phi, est.tau, est.tau_for(cfg.subsets[1]), est.tau_p);

  bool seen = false;
  for (const auto& row : report.at("tevims")) {
    const auto& want = row.at("name") == "x1" ? psi1 : psi2;
    CHECK(row.at("psi").get<double>() == want.psi);
    CHECK(row.at("se").get<double>() == want.se);
    seen = seen || row.at("name") == "x1";
  }
  CHECK(seen);
  CHECK(report.at("ate").at("estimate").get<double>() == estimate_ate(est.phi).value);
  CHECK(report.at("schema_version") == 1);
  CHECK(report.at("seed") == 3);
  CHECK(report.at("config").at("folds") == 5);
  CHECK(report.at("software").at("version").is_string());
  CHECK(report.at("learner_notice").is_string());
  CHECK(report.at("warnings").is_array());
  CHECK(report.at("vte").contains("root"));
  CHECK(report.contains("lambda_bound"));

  // Rows are sorted by the point estimate and the CSV mirrors them.
  const auto& rows = report.at("tevims");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("psi").get<double>() >= rows[1].at("psi").get<double>());
  CHECK(rows[0].at("rank") == 1);
  std::istringstream table(slurp(out / "tevims.csv"));
  std::string header, first;
  std::getline(table, header);
  std::getline(table, first);
  CHECK(header.rfind("rank,name,covariates,theta_s,theta_p,psi,se,ci_lower,ci_upper", 0) == 0);
  CHECK(first.rfind("1," + rows[0].at("name").get<std::string>() + ",", 0) == 0);
}

TEST_CASE("estimate output is byte-identical across runs and thread counts") {
  const auto csv = study_csv();
  const std::string base = "estimate --data \"" + csv.string() + "\" --folds 4 --seed 11 --null-test";
  REQUIRE(cli(base + " --threads 1 --out \"" + (kWork / "det1").string() + "\"").code == 0);
  REQUIRE(cli(base + " --threads 1 --out \"" + (kWork / "det2").string() + "\"").code == 0);
  REQUIRE(cli(base + " --threads 4 --out \"" + (kWork / "det4").string() + "\"").code == 0);
  for (const char* file : {"report.json", "tevims.csv"}) {
    CAPTURE(file);
    CHECK(slurp(kWork / "det1" / file) == slurp(kWork / "det2" / file));
    CHECK(slurp(kWork / "det1" / file) == slurp(kWork / "det4" / file));
  }
  const auto report = json::parse(slurp(kWork / "det1" / "report.json"));
  REQUIRE(report.at("null_tests").size() == 2);
  CHECK(report.at("null_tests")[0].at("endorsed") == true);
}

TEST_CASE("unknown covariate: exit code 2 and the column is named") {
  const auto r = cli("estimate --data \"" + study_csv().string() + "\" --subsets height --out \"" +
                     (kWork / "bad").string() + "\"");
  CHECK(r.code == 2);
  const auto e = error_object(r);
  CHECK(e.at("kind") == "schema");
  CHECK(e.at("exit_code") == 2);
  CHECK(e.at("message").get<std::string>().find("height") != std::string::npos);
}

TEST_CASE("configuration failures exit with 2, estimation failures with 1") {
  CHECK(cli("estimate --data \"" + (kWork / "nope.csv").string() + "\"").code == 2);
  CHECK(cli("estimate --data \"" + study_csv().string() + "\" --algorithm 5Z").code == 2);
  CHECK(cli("estimate --no-such-flag").code == 2);
  CHECK(cli("").code == 2);
  CHECK(cli("--help").code == 0);

  const auto cfg = kWork / "unknown_key.json";
  write_text(cfg, R"({"foldz": 3})");
  const auto r = cli("estimate --config \"" + cfg.string() + "\" --data \"" + study_csv().string() + "\"");
  CHECK(r.code == 2);
  CHECK(error_object(r).at("kind") == "config");

  // Constant CATE learners make the VTE estimate exactly zero.
  const auto flat = kWork / "flat.json";
  write_text(flat, R"({"learners": {"cate": {"type": "constant"}, "subset": {"type": "constant"}}})");
  const auto f = cli("estimate --config \"" + flat.string() + "\" --data \"" + study_csv().string() +
                     "\" --folds 3 --out \"" + (kWork / "flat").string() + "\"");
  CHECK(f.code == 1);
  CHECK(error_object(f).at("kind") == "estimation");
}

TEST_CASE("twelve-covariate trial-style file with a known propensity and K=20") {
  const std::vector<std::string> names{"age", "wtkg", "hemo", "homo",  "drugs", "karnof",
                                       "oprior", "z30", "preanti", "race", "gender", "symptom"};
  const auto csv = kWork / "trial.csv";
  {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0, 1);
    std::ofstream out(csv);
    out << "cd4_20,arm";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (int i = 0; i < 600; ++i) {
      std::vector<double> x(names.size());
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = j >= 9 ? static_cast<double>(rng() % 2) : z(rng);
      const int a = static_cast<int>(rng() % 2);
      const double y = 350 + 20 * x[0] + a * (30 + 15 * x[0] - 10 * x[10]) + 5 * z(rng);
      out << format_double(y) << ',' << a;
      for (double v : x) out << ',' << format_double(v);
      out << '\n';
    }
  }
  const auto cfg = kWork / "trial.json";
  write_text(cfg, R"({
    "data": {"outcome": "cd4_20", "treatment": "arm"},
    "folds": 20,
    "learners": {
      "outcome": {"type": "ridge_basis", "degree": 2, "include_interactions": false, "penalty": 0.0001},
      "propensity": {"type": "known_constant", "value": 0.5},
      "cate": {"type": "ridge_basis", "degree": 1, "include_interactions": false, "penalty": 0.0001},
      "subset": {"type": "ridge_basis", "degree": 1, "include_interactions": false, "penalty": 0.0001}
    }
  })");
  const auto out = kWork / "trial";
  const auto r = cli("estimate --config \"" + cfg.string() + "\" --data \"" + csv.string() + "\" --out \"" +
                     out.string() + "\"");
  REQUIRE(r.code == 0);
  const auto report = json::parse(slurp(out / "report.json"));
  CHECK(report.at("p") == 12);
  CHECK(report.at("folds").at("count") == 20);
  CHECK(report.at("config").at("data").at("covariates").size() == 12);
  const auto& rows = report.at("tevims");
  REQUIRE(rows.size() == 12);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].at("rank") == k + 1);
    if (k) CHECK(rows[k - 1].at("psi").get<double>() >= rows[k].at("psi").get<double>());
    const auto& ci = rows[k].at("ci_truncated");
    CHECK(ci[0].get<double>() >= 0.0);
    CHECK(ci[1].get<double>() <= 1.0);
  }
  // tau = 30 + 15 age - 10 gender: var = 225 + 25, so Psi_age = 0.9 and Psi_gender = 0.1.
  CHECK(rows[0].at("name") == "age");
  CHECK(rows[1].at("name") == "gender");
  CHECK(std::abs(rows[0].at("psi").get<double>() - 0.9) < 0.1);
  CHECK(std::abs(rows[1].at("psi").get<double>() - 0.1) < 0.1);

  std::istringstream table(slurp(out / "tevims.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(table, line)) ++lines;
  CHECK(lines == 13);
}

TEST_CASE("simulate: grid counting and byte-identical reruns") {
  const std::string args = "simulate --sizes 500 --replicates 1 --algorithms 1A,2B --seed 9";
  REQUIRE(cli(args + " --out \"" + (kWork / "sim1").string() + "\"").code == 0);
  REQUIRE(cli(args + " --threads 3 --out \"" + (kWork / "sim2").string() + "\"").code == 0);
  const auto metrics = slurp(kWork / "sim1" / "metrics.csv");
  CHECK(metrics == slurp(kWork / "sim2" / "metrics.csv"));
  CHECK(slurp(kWork / "sim1" / "summary.json") == slurp(kWork / "sim2" / "summary.json"));
  std::istringstream in(metrics);
  std::string line;
  std::getline(in, line);
  CHECK(line == "variant,learner,n,subset,scaled_bias,scaled_variance,coverage,replicates");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
  const auto summary = json::parse(slurp(kWork / "sim1" / "summary.json"));
  CHECK(summary.at("config").at("seed") == 9);
}

TEST_CASE("truths: values, the lambda bound and resolution") {
  const auto out = kWork / "truths";
  const auto r = cli("truths --out \"" + out.string() + "\"");
  REQUIRE(r.code == 0);
  const auto j = json::parse(slurp(out / "truths.json"));
  CHECK(std::abs(j.at("psi1").get<double>() - 0.32) <= 0.005);
  CHECK(std::abs(j.at("psi2").get<double>() - 0.68) <= 0.005);
  CHECK(std::abs(j.at("ate").get<double>() - 1.39) <= 0.005);
  CHECK(std::abs(j.at("vte").get<double>() - 1.00) <= 0.005);
  CHECK(std::abs(j.at("lambda").get<double>() - 0.518) <= 0.001);
  CHECK(json::parse(r.out) == j);

  const auto fine = cli("truths --points 2000 --out \"" + (kWork / "truths2").string() + "\"");
  REQUIRE(fine.code == 0);
  const auto k = json::parse(slurp(kWork / "truths2" / "truths.json"));
  for (const char* key : {"psi1", "psi2", "ate", "vte"})
    CHECK(std::abs(j.at(key).get<double>() - k.at(key).get<double>()) < 1e-4);
  CHECK(cli("truths --points 10").code == 2);
}
