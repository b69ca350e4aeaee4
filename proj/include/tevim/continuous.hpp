#pragma once

#include "tevim/crossfit.hpp"
#include "tevim/data.hpp"
#include "tevim/estimands.hpp"
#include "tevim/learners.hpp"
#include "tevim/nuisance.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace tevim {

/// Nuisances for a continuous exposure: E(Y|X), E(A|X), var(A|X) floored at
/// variance_floor, and lambda(x) = cov(A,Y|X) / var(A|X).
struct ContinuousNuisance {
  FittedModel mu_x;
  FittedModel pi_x;
  FittedModel v_x;
  FittedModel lambda_x;
  double variance_floor;
};

/// mu_x: Y on X and the residual cross-product use outcome_spec; pi_x: A on
/// X and the squared treatment residual use treatment_spec (or a known
/// constant mean). lambda_x is the ratio of the cross-product regression to
/// the floored variance regression.
ContinuousNuisance fit_continuous_nuisance(const Dataset& train, const LearnerSpec& outcome_spec,
                                           const PropensitySpec& treatment_spec, double variance_floor,
                                           std::uint64_t seed);

/// [y - mu - lambda (a - pi)] (a - pi) / v + lambda, elementwise.
Eigen::VectorXd lambda_pseudo_outcome(const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::VectorXd& mu,
                                      const Eigen::VectorXd& pi, const Eigen::VectorXd& v,
                                      const Eigen::VectorXd& lambda);

Eigen::VectorXd pseudo_outcome_lambda(const Dataset& data, const ContinuousNuisance& nuisance);

/// Continuous nuisances implied by binary ones: mu = pi mu1 + (1 - pi) mu0,
/// v = pi (1 - pi), lambda = mu1 - mu0. The floor is applied to v.
ContinuousNuisance moment_matched_nuisance(const NuisanceFits& fits, double variance_floor);

struct ContinuousTevimResult {
  ScalarEstimate mean_lambda;   // E{lambda(X)}
  VteEstimate var_lambda;       // var{lambda(X)}
  std::vector<TevimEstimate> tevims;
  PerObservationEstimates estimates;
};

/// Runs the cross-fitting orchestration on a continuous-mode dataset and
/// feeds the result through the usual estimators.
ContinuousTevimResult continuous_tevim(const Dataset& data, const AlgorithmConfig& cfg);

}  // namespace tevim
