#include "tevim/continuous.hpp"

#include "tevim/error.hpp"
#include "tevim/seeding.hpp"

#include <cmath>

namespace tevim {

ContinuousNuisance fit_continuous_nuisance(const Dataset& train, const LearnerSpec& outcome_spec,
                                           const PropensitySpec& treatment_spec, double variance_floor,
                                           std::uint64_t seed) {
  if (!(variance_floor > 0.0)) fail(ErrorKind::config, "variance floor must be positive");
  const auto& X = train.covariates();
  const auto& y = train.outcome();
  const auto& a = train.treatment();

  FittedModel mu = fit(outcome_spec, X, y, derive_seed(seed, {stage::outcome_control}));
  const auto* known = std::get_if<KnownConstant>(&treatment_spec);
  const LearnerSpec treatment_learner = known ? LearnerSpec{ConstantSpec{}} : std::get<LearnerSpec>(treatment_spec);
  FittedModel pi = known ? FittedModel::constant(known->value, train.p())
                         : fit(treatment_learner, X, a, derive_seed(seed, {stage::propensity}));

  const Eigen::VectorXd a_resid = a - pi.predict(X);
  const Eigen::VectorXd y_resid = y - mu.predict(X);
  FittedModel raw_variance = fit(treatment_learner, X, a_resid.array().square().matrix(),
                                 derive_seed(seed, {stage::treatment_variance}));
  FittedModel covariance = fit(outcome_spec, X, a_resid.cwiseProduct(y_resid), derive_seed(seed, {stage::covariance}));

  FittedModel v = FittedModel::from_function(
      [raw_variance, variance_floor](const Eigen::MatrixXd& Z) {
        return Eigen::VectorXd(raw_variance.predict(Z).cwiseMax(variance_floor));
      },
      train.p());
  FittedModel lambda = FittedModel::from_function(
      [covariance, v](const Eigen::MatrixXd& Z) {
        return Eigen::VectorXd(covariance.predict(Z).cwiseQuotient(v.predict(Z)));
      },
      train.p());
  return ContinuousNuisance{std::move(mu), std::move(pi), std::move(v), std::move(lambda), variance_floor};
}

Eigen::VectorXd lambda_pseudo_outcome(const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::VectorXd& mu,
                                      const Eigen::VectorXd& pi, const Eigen::VectorXd& v,
                                      const Eigen::VectorXd& lambda) {
  const auto n = y.size();
  if (a.size() != n || mu.size() != n || pi.size() != n || v.size() != n || lambda.size() != n)
    fail(ErrorKind::contract, "pseudo-outcome inputs have different lengths");
  Eigen::VectorXd phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double resid = a[i] - pi[i];
    phi[i] = (y[i] - mu[i] - lambda[i] * resid) * resid / v[i] + lambda[i];
    if (!std::isfinite(phi[i]))
      fail(ErrorKind::numeric, "non-finite pseudo-outcome at row " + std::to_string(i + 1));
  }
  return phi;
}

Eigen::VectorXd pseudo_outcome_lambda(const Dataset& data, const ContinuousNuisance& nuisance) {
  const auto& X = data.covariates();
  return lambda_pseudo_outcome(data.outcome(), data.treatment(), nuisance.mu_x.predict(X), nuisance.pi_x.predict(X),
                               nuisance.v_x.predict(X), nuisance.lambda_x.predict(X));
}

ContinuousNuisance moment_matched_nuisance(const NuisanceFits& fits, double variance_floor) {
  const auto p = fits.mu0.feature_count();
  auto mu = FittedModel::from_function(
      [fits](const Eigen::MatrixXd& X) {
        const Eigen::ArrayXd pi = fits.pi.predict(X).array();
        return Eigen::VectorXd(pi * fits.mu1.predict(X).array() + (1 - pi) * fits.mu0.predict(X).array());
      },
      p);
  auto v = FittedModel::from_function(
      [fits, variance_floor](const Eigen::MatrixXd& X) {
        const Eigen::ArrayXd pi = fits.pi.predict(X).array();
        return Eigen::VectorXd((pi * (1 - pi)).max(variance_floor));
      },
      p);
  auto lambda = FittedModel::from_function(
      [fits](const Eigen::MatrixXd& X) { return Eigen::VectorXd(fits.mu1.predict(X) - fits.mu0.predict(X)); }, p);
  return ContinuousNuisance{std::move(mu), fits.pi, std::move(v), std::move(lambda), variance_floor};
}

ContinuousTevimResult continuous_tevim(const Dataset& data, const AlgorithmConfig& cfg) {
  if (data.mode() != TreatmentMode::continuous) fail(ErrorKind::config, "continuous_tevim needs a continuous-mode dataset");
  ContinuousTevimResult out;
  out.estimates = run_algorithm(data, cfg);
  const auto& e = out.estimates;
  out.mean_lambda = estimate_ate(e.phi);
  out.var_lambda = estimate_vte(e.phi, e.tau, e.tau_p);
  for (std::size_t k = 0; k < e.subsets.size(); ++k) {
    auto t = estimate_psi(e.phi, e.tau, e.tau_s[k], e.tau_p);
    t.subset = e.subsets[k];
    out.tevims.push_back(std::move(t));
  }
  return out;
}

}  // namespace tevim
