#pragma once

#include "tevim/crossfit.hpp"
#include "tevim/data.hpp"
#include "tevim/nuisance.hpp"
#include "tevim/simulation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tevim {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kSoftwareVersion = "0.1.0";

/// A subset of interest given by covariate names.
struct NamedSubset {
  std::string name;
  std::vector<std::string> covariates;
  friend bool operator==(const NamedSubset&, const NamedSubset&) = default;
};

/// Parses "x1;x2;grp=x1,x2": entries separated by ';', an optional
/// "name=" prefix, covariates separated by ','. Unnamed entries are named
/// after their covariate list.
std::vector<NamedSubset> parse_subset_list(const std::string& text);

struct DataSource {
  std::string path;
  std::string outcome = "y";
  std::string treatment = "a";
  /// Empty means every column other than outcome and treatment.
  std::vector<std::string> covariates;
  TreatmentMode mode = TreatmentMode::binary;
  friend bool operator==(const DataSource&, const DataSource&) = default;
};

struct EstimateConfig {
  DataSource data;
  Algorithm algorithm;
  int folds = 20;
  std::uint64_t seed = 1;
  double clip = 0.01;
  double variance_floor = 1e-3;
  double confidence_level = 0.95;
  LearnerSpec outcome = default_flexible_learner();
  PropensitySpec propensity = LearnerSpec{default_flexible_learner()};
  LearnerSpec cate = default_flexible_learner();
  LearnerSpec subset = default_flexible_learner();
  /// Empty means one subset per covariate.
  std::vector<NamedSubset> subsets;
  bool null_test = false;
  friend bool operator==(const EstimateConfig&, const EstimateConfig&) = default;
};

struct SimulateConfig {
  std::vector<std::int64_t> sizes{500, 2000};
  std::vector<Algorithm> algorithms{Algorithm::parse("1A"), Algorithm::parse("1B"), Algorithm::parse("2A"),
                                    Algorithm::parse("2B")};
  std::vector<LearnerSet> learners{flexible_learner_set()};
  int replicates = 200;
  int folds = 5;
  double clip = 0.01;
  std::uint64_t seed = 1;
  int quadrature_points = 1000;

  /// 1000 replicates over n in {500, 1000, 2000, 3000, 4000}.
  void use_full_scale();
  McGrid grid(int threads) const;
};

bool operator==(const LearnerSet& lhs, const LearnerSet& rhs);
bool operator==(const SimulateConfig& lhs, const SimulateConfig& rhs);

struct TruthsConfig {
  int quadrature_points = 1000;
  friend bool operator==(const TruthsConfig&, const TruthsConfig&) = default;
};

/// Settings that affect where and how fast a command runs but never its
/// results. They are read from config files but not embedded in reports.
struct RuntimeOptions {
  std::filesystem::path out = "tevim_out";
  int threads = 1;
};

nlohmann::json to_json(const EstimateConfig& cfg);
nlohmann::json to_json(const SimulateConfig& cfg);
nlohmann::json to_json(const TruthsConfig& cfg);
nlohmann::json to_json(const LearnerSet& set);

/// Parsers reject unknown keys and out-of-range values with a config error.
/// Missing keys take their defaults.
EstimateConfig estimate_config_from_json(const nlohmann::json& j);
SimulateConfig simulate_config_from_json(const nlohmann::json& j);
TruthsConfig truths_config_from_json(const nlohmann::json& j);
/// Accepts a preset name ("ridge_basis", "boosted_trees") or an object.
LearnerSet learner_set_from_json(const nlohmann::json& j);

/// Reads the "out" and "threads" keys, leaving defaults for absent ones.
RuntimeOptions runtime_options_from_json(const nlohmann::json& j, RuntimeOptions defaults = {});

/// Config error when the file cannot be read or is not valid JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// The estimate config with the covariate list and subsets filled in from
/// the data file, plus the AlgorithmConfig it implies for `data`.
struct ResolvedEstimate {
  EstimateConfig config;
  Dataset data;
  AlgorithmConfig algorithm;
  std::vector<NamedSubset> subset_names;
};

/// Loads the data and resolves subset names. Schema error naming the
/// column for unknown covariates.
ResolvedEstimate resolve(const EstimateConfig& cfg, int threads);

}  // namespace tevim
