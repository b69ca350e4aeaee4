#include "tevim/config.hpp"

#include "tevim/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace tevim {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::config, where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(ErrorKind::config, "unknown " + where + " key '" + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::config, std::string("config key '") + key + "' has the wrong type");
  }
}

void check_schema_version(const json& j) {
  if (!j.contains("schema_version")) return;
  int version = 0;
  read(j, "schema_version", version);
  if (version != kSchemaVersion)
    fail(ErrorKind::config, "unsupported config schema_version " + std::to_string(version));
}

void check_clip(double clip) {
  if (!(clip > 0.0 && clip < 0.5)) fail(ErrorKind::config, "clip must lie in (0, 0.5)");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k) out += sep;
    out += items[k];
  }
  return out;
}

json subsets_to_json(const std::vector<NamedSubset>& subsets) {
  json out = json::array();
  for (const auto& s : subsets) out.push_back({{"name", s.name}, {"covariates", s.covariates}});
  return out;
}

std::vector<NamedSubset> subsets_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorKind::config, "'subsets' must be an array");
  std::vector<NamedSubset> out;
  for (const auto& item : j) {
    reject_unknown(item, {"name", "covariates"}, "subset");
    NamedSubset s;
    read(item, "covariates", s.covariates);
    if (s.covariates.empty()) fail(ErrorKind::config, "a subset needs at least one covariate");
    s.name = join(s.covariates, ',');
    read(item, "name", s.name);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<NamedSubset> parse_subset_list(const std::string& text) {
  std::vector<NamedSubset> out;
  for (const auto& raw : split(text, ';')) {
    const auto entry = trim(raw);
    if (entry.empty()) continue;
    NamedSubset s;
    std::string list = entry;
    if (const auto eq = entry.find('='); eq != std::string::npos) {
      s.name = trim(entry.substr(0, eq));
      list = entry.substr(eq + 1);
      if (s.name.empty()) fail(ErrorKind::config, "empty subset name in '" + entry + "'");
    }
    for (const auto& c : split(list, ',')) {
      const auto name = trim(c);
      if (name.empty()) fail(ErrorKind::config, "empty covariate name in subset '" + entry + "'");
      s.covariates.push_back(name);
    }
    if (s.covariates.empty()) fail(ErrorKind::config, "subset '" + entry + "' lists no covariates");
    if (s.name.empty()) s.name = join(s.covariates, ',');
    out.push_back(std::move(s));
  }
  if (out.empty()) fail(ErrorKind::config, "subset list is empty");
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const EstimateConfig& cfg) {
  return {
      {"schema_version", kSchemaVersion},
      {"data",
       {{"path", cfg.data.path},
        {"outcome", cfg.data.outcome},
        {"treatment", cfg.data.treatment},
        {"covariates", cfg.data.covariates},
        {"mode", to_string(cfg.data.mode)}}},
      {"algorithm", cfg.algorithm.label()},
      {"folds", cfg.folds},
      {"seed", cfg.seed},
      {"clip", cfg.clip},
      {"variance_floor", cfg.variance_floor},
      {"confidence_level", cfg.confidence_level},
      {"learners",
       {{"outcome", to_json(cfg.outcome)},
        {"propensity", to_json(cfg.propensity)},
        {"cate", to_json(cfg.cate)},
        {"subset", to_json(cfg.subset)}}},
      {"subsets", subsets_to_json(cfg.subsets)},
      {"null_test", cfg.null_test},
  };
}

EstimateConfig estimate_config_from_json(const json& j) {
  reject_unknown(j,
                 {"schema_version", "data", "algorithm", "folds", "seed", "clip", "variance_floor", "confidence_level",
                  "learners", "subsets", "null_test", "out", "threads"},
                 "estimate config");
  check_schema_version(j);
  EstimateConfig cfg;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"path", "outcome", "treatment", "covariates", "mode"}, "data");
    read(d, "path", cfg.data.path);
    read(d, "outcome", cfg.data.outcome);
    read(d, "treatment", cfg.data.treatment);
    read(d, "covariates", cfg.data.covariates);
    if (d.contains("mode")) {
      std::string mode;
      read(d, "mode", mode);
      cfg.data.mode = parse_treatment_mode(mode);
    }
  }
  if (j.contains("algorithm")) {
    std::string label;
    read(j, "algorithm", label);
    cfg.algorithm = Algorithm::parse(label);
  }
  read(j, "folds", cfg.folds);
  read(j, "seed", cfg.seed);
  read(j, "clip", cfg.clip);
  read(j, "variance_floor", cfg.variance_floor);
  read(j, "confidence_level", cfg.confidence_level);
  if (j.contains("learners")) {
    const auto& l = j.at("learners");
    reject_unknown(l, {"outcome", "propensity", "cate", "subset"}, "learners");
    if (l.contains("outcome")) cfg.outcome = learner_from_json(l.at("outcome"));
    if (l.contains("propensity")) cfg.propensity = propensity_from_json(l.at("propensity"));
    if (l.contains("cate")) cfg.cate = learner_from_json(l.at("cate"));
    if (l.contains("subset")) cfg.subset = learner_from_json(l.at("subset"));
  }
  if (j.contains("subsets")) cfg.subsets = subsets_from_json(j.at("subsets"));
  read(j, "null_test", cfg.null_test);

  if (cfg.folds < 2) fail(ErrorKind::config, "folds must be at least 2");
  check_clip(cfg.clip);
  if (!(cfg.variance_floor > 0.0)) fail(ErrorKind::config, "variance_floor must be positive");
  if (!(cfg.confidence_level > 0.0 && cfg.confidence_level < 1.0))
    fail(ErrorKind::config, "confidence_level must lie in (0, 1)");
  return cfg;
}

// ---------------------------------------------------------------------------

bool operator==(const LearnerSet& lhs, const LearnerSet& rhs) {
  return lhs.name == rhs.name && lhs.outcome == rhs.outcome && lhs.propensity == rhs.propensity &&
         lhs.cate == rhs.cate && lhs.subset == rhs.subset;
}

bool operator==(const SimulateConfig& lhs, const SimulateConfig& rhs) {
  return lhs.sizes == rhs.sizes && lhs.algorithms == rhs.algorithms && lhs.learners == rhs.learners &&
         lhs.replicates == rhs.replicates && lhs.folds == rhs.folds && lhs.clip == rhs.clip &&
         lhs.seed == rhs.seed && lhs.quadrature_points == rhs.quadrature_points;
}

void SimulateConfig::use_full_scale() {
  McGrid g;
  g.use_full_scale();
  sizes.assign(g.sizes.begin(), g.sizes.end());
  replicates = g.replicates;
}

McGrid SimulateConfig::grid(int threads) const {
  McGrid g;
  g.sizes.assign(sizes.begin(), sizes.end());
  g.algorithms = algorithms;
  g.learners = learners;
  g.replicates = replicates;
  g.folds = folds;
  g.clip = clip;
  g.seed = seed;
  g.threads = threads;
  g.quadrature_points = quadrature_points;
  return g;
}

json to_json(const LearnerSet& set) {
  return {{"name", set.name},
          {"outcome", to_json(set.outcome)},
          {"propensity", to_json(set.propensity)},
          {"cate", to_json(set.cate)},
          {"subset", to_json(set.subset)}};
}

LearnerSet learner_set_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "ridge_basis") return flexible_learner_set();
    if (name == "boosted_trees") return boosted_learner_set();
    fail(ErrorKind::config, "unknown learner preset '" + name + "'");
  }
  reject_unknown(j, {"name", "outcome", "propensity", "cate", "subset"}, "learner set");
  LearnerSet set = flexible_learner_set();
  read(j, "name", set.name);
  if (set.name.empty()) fail(ErrorKind::config, "learner sets need a name");
  if (j.contains("outcome")) set.outcome = learner_from_json(j.at("outcome"));
  if (j.contains("propensity")) set.propensity = propensity_from_json(j.at("propensity"));
  if (j.contains("cate")) set.cate = learner_from_json(j.at("cate"));
  if (j.contains("subset")) set.subset = learner_from_json(j.at("subset"));
  return set;
}

json to_json(const SimulateConfig& cfg) {
  json algorithms = json::array();
  for (const auto& a : cfg.algorithms) algorithms.push_back(a.label());
  json learners = json::array();
  for (const auto& l : cfg.learners) learners.push_back(to_json(l));
  return {{"schema_version", kSchemaVersion}, {"sizes", cfg.sizes},       {"algorithms", algorithms},
          {"learners", learners},             {"replicates", cfg.replicates}, {"folds", cfg.folds},
          {"clip", cfg.clip},                 {"seed", cfg.seed},         {"quadrature_points", cfg.quadrature_points}};
}

SimulateConfig simulate_config_from_json(const json& j) {
  reject_unknown(j,
                 {"schema_version", "sizes", "algorithms", "learners", "replicates", "folds", "clip", "seed",
                  "quadrature_points", "full", "out", "threads"},
                 "simulate config");
  check_schema_version(j);
  SimulateConfig cfg;
  bool full = false;
  read(j, "full", full);
  if (full) cfg.use_full_scale();
  read(j, "sizes", cfg.sizes);
  if (j.contains("algorithms")) {
    std::vector<std::string> labels;
    read(j, "algorithms", labels);
    cfg.algorithms.clear();
    for (const auto& l : labels) cfg.algorithms.push_back(Algorithm::parse(l));
  }
  if (j.contains("learners")) {
    if (!j.at("learners").is_array()) fail(ErrorKind::config, "'learners' must be an array");
    cfg.learners.clear();
    for (const auto& l : j.at("learners")) cfg.learners.push_back(learner_set_from_json(l));
  }
  read(j, "replicates", cfg.replicates);
  read(j, "folds", cfg.folds);
  read(j, "clip", cfg.clip);
  read(j, "seed", cfg.seed);
  read(j, "quadrature_points", cfg.quadrature_points);

  if (cfg.sizes.empty() || cfg.algorithms.empty() || cfg.learners.empty())
    fail(ErrorKind::config, "simulation grid needs sizes, algorithms and learners");
  for (auto n : cfg.sizes)
    if (n < 2) fail(ErrorKind::config, "simulation sizes must be at least 2");
  std::set<std::string> names;
  for (const auto& l : cfg.learners)
    if (!names.insert(l.name).second) fail(ErrorKind::config, "duplicate learner set name '" + l.name + "'");
  if (cfg.replicates < 1) fail(ErrorKind::config, "replicates must be at least 1");
  if (cfg.folds < 2) fail(ErrorKind::config, "folds must be at least 2");
  check_clip(cfg.clip);
  if (cfg.quadrature_points < 1000) fail(ErrorKind::config, "quadrature_points must be at least 1000");
  return cfg;
}

json to_json(const TruthsConfig& cfg) {
  return {{"schema_version", kSchemaVersion}, {"quadrature_points", cfg.quadrature_points}};
}

TruthsConfig truths_config_from_json(const json& j) {
  reject_unknown(j, {"schema_version", "quadrature_points", "out", "threads"}, "truths config");
  check_schema_version(j);
  TruthsConfig cfg;
  read(j, "quadrature_points", cfg.quadrature_points);
  if (cfg.quadrature_points < 1000) fail(ErrorKind::config, "quadrature_points must be at least 1000");
  return cfg;
}

RuntimeOptions runtime_options_from_json(const json& j, RuntimeOptions defaults) {
  if (j.contains("out")) {
    std::string out;
    read(j, "out", out);
    defaults.out = out;
  }
  read(j, "threads", defaults.threads);
  if (defaults.threads < 1) fail(ErrorKind::config, "threads must be at least 1");
  return defaults;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::config, "cannot open config '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::config, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------

ResolvedEstimate resolve(const EstimateConfig& cfg, int threads) {
  EstimateConfig resolved = cfg;
  if (resolved.data.path.empty()) fail(ErrorKind::config, "no data file given");
  if (resolved.data.covariates.empty()) {
    for (const auto& column : read_csv_header(resolved.data.path))
      if (column != resolved.data.outcome && column != resolved.data.treatment)
        resolved.data.covariates.push_back(column);
  }
  Dataset data = load_csv(resolved.data.path, resolved.data.outcome, resolved.data.treatment,
                          resolved.data.covariates, resolved.data.mode);
  if (resolved.subsets.empty())
    for (const auto& name : resolved.data.covariates) resolved.subsets.push_back({name, {name}});

  AlgorithmConfig alg;
  alg.algorithm = resolved.algorithm;
  alg.folds = resolved.folds;
  alg.outcome = resolved.outcome;
  alg.propensity = resolved.propensity;
  alg.cate = resolved.cate;
  alg.subset = resolved.subset;
  alg.clip = resolved.clip;
  alg.variance_floor = resolved.variance_floor;
  alg.seed = resolved.seed;
  alg.threads = threads;
  std::set<std::string> names;
  for (const auto& s : resolved.subsets) {
    if (!names.insert(s.name).second) fail(ErrorKind::config, "duplicate subset name '" + s.name + "'");
    std::vector<int> indices;
    for (const auto& c : s.covariates) indices.push_back(static_cast<int>(data.covariate_position(c)) + 1);
    alg.subsets.emplace_back(std::move(indices), static_cast<int>(data.p()));
  }
  validate(alg, data);
  auto subset_names = resolved.subsets;
  return ResolvedEstimate{std::move(resolved), std::move(data), std::move(alg), std::move(subset_names)};
}

}  // namespace tevim
