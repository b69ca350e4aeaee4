#pragma once

#include "tevim/data.hpp"
#include "tevim/learners.hpp"

#include <cstdint>
#include <utility>
#include <variant>

namespace tevim {

/// Propensity fixed by design, e.g. the randomization probability of a trial.
struct KnownConstant {
  double value = 0.5;
  friend bool operator==(const KnownConstant&, const KnownConstant&) = default;
};

using PropensitySpec = std::variant<LearnerSpec, KnownConstant>;

nlohmann::json to_json(const PropensitySpec& spec);
PropensitySpec propensity_from_json(const nlohmann::json& j);

/// mu(0,x), mu(1,x) and the clipped propensity pi(x).
struct NuisanceFits {
  FittedModel mu0;
  FittedModel mu1;
  FittedModel pi;
  double clip;
};

/// Arm-specific regressions of Y on X: mu_a fitted on rows with A = a.
std::pair<FittedModel, FittedModel> fit_outcome_models(const Dataset& train, const LearnerSpec& spec,
                                                       std::uint64_t seed);

/// Propensity model with predictions in [clip, 1 - clip]. constant{} gives
/// the training-set treatment mean.
FittedModel fit_propensity(const Dataset& train, const PropensitySpec& spec, double clip, std::uint64_t seed);

NuisanceFits fit_nuisance(const Dataset& train, const LearnerSpec& outcome_spec, const PropensitySpec& propensity_spec,
                          double clip, std::uint64_t seed);

}  // namespace tevim
