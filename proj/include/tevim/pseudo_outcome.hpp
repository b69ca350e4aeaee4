#pragma once

#include "tevim/data.hpp"
#include "tevim/nuisance.hpp"

#include <Eigen/Dense>

namespace tevim {

/// AIPW pseudo-outcome from nuisance values at each row:
///   {y - mu(a,x)} (a - pi) / (pi (1 - pi)) + mu(1,x) - mu(0,x).
/// Numeric error naming the first row with a non-finite result.
Eigen::VectorXd aipw_pseudo_outcome(const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::VectorXd& mu0,
                                    const Eigen::VectorXd& mu1, const Eigen::VectorXd& pi);

/// Pseudo-outcomes for every row of `data`, evaluated with the (already
/// clipped) propensity model in `fits`.
Eigen::VectorXd compute_pseudo_outcomes(const Dataset& data, const NuisanceFits& fits);

}  // namespace tevim
