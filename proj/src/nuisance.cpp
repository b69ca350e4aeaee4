#include "tevim/nuisance.hpp"

#include "tevim/error.hpp"
#include "tevim/seeding.hpp"

#include <cmath>

namespace tevim {

nlohmann::json to_json(const PropensitySpec& spec) {
  if (const auto* known = std::get_if<KnownConstant>(&spec))
    return nlohmann::json{{"type", "known_constant"}, {"value", known->value}};
  return to_json(std::get<LearnerSpec>(spec));
}

PropensitySpec propensity_from_json(const nlohmann::json& j) {
  if (j.is_object() && j.contains("type") && j.at("type") == "known_constant") {
    for (const auto& [key, value] : j.items())
      if (key != "type" && key != "value") fail(ErrorKind::config, "unknown propensity field '" + key + "'");
    if (!j.contains("value") || !j.at("value").is_number())
      fail(ErrorKind::config, "known_constant propensity needs a numeric 'value'");
    const double v = j.at("value").get<double>();
    if (!(v > 0.0 && v < 1.0)) fail(ErrorKind::config, "known_constant propensity must lie in (0, 1)");
    return KnownConstant{v};
  }
  return learner_from_json(j);
}

std::pair<FittedModel, FittedModel> fit_outcome_models(const Dataset& train, const LearnerSpec& spec,
                                                       std::uint64_t seed) {
  if (train.mode() != TreatmentMode::binary) fail(ErrorKind::config, "outcome models by arm need binary treatment");
  std::vector<Eigen::Index> arm[2];
  for (Eigen::Index i = 0; i < train.n(); ++i) arm[train.treatment()[i] == 1.0].push_back(i);
  auto fit_arm = [&](int a, std::uint64_t tag) {
    const auto& rows = arm[a];
    if (rows.empty())
      fail(ErrorKind::estimation, "treatment arm " + std::to_string(a) +
                                      " is empty in the training data; use arm-stratified folds or fewer folds");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), train.p());
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      X.row(r) = train.covariates().row(rows[static_cast<std::size_t>(r)]);
      y[r] = train.outcome()[rows[static_cast<std::size_t>(r)]];
    }
    return fit(spec, X, y, derive_seed(seed, {tag}));
  };
  return {fit_arm(0, stage::outcome_control), fit_arm(1, stage::outcome_treated)};
}

FittedModel fit_propensity(const Dataset& train, const PropensitySpec& spec, double clip, std::uint64_t seed) {
  if (train.mode() != TreatmentMode::binary) fail(ErrorKind::config, "propensity models need binary treatment");
  if (!(clip > 0.0 && clip < 0.5)) fail(ErrorKind::config, "propensity clip must lie in (0, 0.5)");
  if (const auto* known = std::get_if<KnownConstant>(&spec)) {
    if (!(known->value > 0.0 && known->value < 1.0))
      fail(ErrorKind::config, "known_constant propensity must lie in (0, 1)");
    return FittedModel::constant(known->value, train.p(), clip);
  }
  return fit_probability(std::get<LearnerSpec>(spec), train.covariates(), train.treatment(), clip,
                         derive_seed(seed, {stage::propensity}));
}

NuisanceFits fit_nuisance(const Dataset& train, const LearnerSpec& outcome_spec, const PropensitySpec& propensity_spec,
                          double clip, std::uint64_t seed) {
  auto [mu0, mu1] = fit_outcome_models(train, outcome_spec, seed);
  auto pi = fit_propensity(train, propensity_spec, clip, seed);
  return NuisanceFits{std::move(mu0), std::move(mu1), std::move(pi), clip};
}

}  // namespace tevim
