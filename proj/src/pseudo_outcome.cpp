#include "tevim/pseudo_outcome.hpp"

#include "tevim/error.hpp"

#include <cmath>

namespace tevim {

Eigen::VectorXd aipw_pseudo_outcome(const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::VectorXd& mu0,
                                    const Eigen::VectorXd& mu1, const Eigen::VectorXd& pi) {
  const auto n = y.size();
  if (a.size() != n || mu0.size() != n || mu1.size() != n || pi.size() != n)
    fail(ErrorKind::contract, "pseudo-outcome inputs have different lengths");
  Eigen::VectorXd phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu_a = a[i] == 1.0 ? mu1[i] : mu0[i];
    phi[i] = (y[i] - mu_a) * (a[i] - pi[i]) / (pi[i] * (1.0 - pi[i])) + mu1[i] - mu0[i];
    if (!std::isfinite(phi[i]))
      fail(ErrorKind::numeric, "non-finite pseudo-outcome at row " + std::to_string(i + 1));
  }
  return phi;
}

Eigen::VectorXd compute_pseudo_outcomes(const Dataset& data, const NuisanceFits& fits) {
  if (data.mode() != TreatmentMode::binary) fail(ErrorKind::config, "AIPW pseudo-outcomes need binary treatment");
  const auto& X = data.covariates();
  return aipw_pseudo_outcome(data.outcome(), data.treatment(), fits.mu0.predict(X), fits.mu1.predict(X),
                             fits.pi.predict(X));
}

}  // namespace tevim
