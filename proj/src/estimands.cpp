#include "tevim/estimands.hpp"

#include "tevim/normal.hpp"
#include "tevim/seeding.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace tevim {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::config, "normal quantile needs p in (0, 1)");
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                           1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                           6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                           -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                           3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

double critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::config, "confidence level must lie in (0, 1)");
  if (level == 0.95) return kZ95;
  return normal_quantile(0.5 + level / 2);
}

TevimEstimate estimate_psi(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau, const Eigen::VectorXd& tau_s,
                           const Eigen::VectorXd& tau_p, double level) {
  const double z = critical_value(level);
  TevimEstimate out;
  out.n = phi.size();
  out.theta_s = estimate_theta(phi, tau, tau_s);
  out.theta_p = estimate_theta(phi, tau, tau_p);
  // Zero up to rounding in the difference of the two squared-residual means.
  const double scale = ((phi - tau_p).squaredNorm() + (phi - tau).squaredNorm()) / static_cast<double>(phi.size());
  if (std::abs(out.theta_p) <= 1e-12 * scale)
    fail(ErrorKind::estimation, "estimated VTE is zero; the importance ratio is undefined");
  out.psi = out.theta_s / out.theta_p;
  const Eigen::VectorXd ic = psi_influence(phi, tau, tau_s, tau_p, out.psi, out.theta_p);
  const auto wald = wald_from_influence(out.psi, ic, z);
  out.var_psi = wald.variance;
  out.se = wald.se;
  out.ci_raw = wald.ci;
  out.ci_truncated = {std::clamp(wald.ci.lower, 0.0, 1.0), std::clamp(wald.ci.upper, 0.0, 1.0)};
  out.p_value_wald = wald.p_value;
  out.negative_theta_s = out.theta_s < 0;
  out.negative_vte = out.theta_p < 0;
  const auto vte = wald_from_influence(out.theta_p, theta_influence(phi, tau, tau_p), z);
  out.degenerate_vte = vte.ci.lower <= 0.0;
  return out;
}

ScalarEstimate estimate_ate(const Eigen::VectorXd& phi, double level) {
  if (phi.size() == 0) fail(ErrorKind::contract, "ATE of an empty sample");
  const double value = phi.mean();
  return wald_from_influence(value, (phi.array() - value).matrix(), critical_value(level));
}

VteEstimate estimate_vte(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau, const Eigen::VectorXd& tau_p,
                         double level) {
  VteEstimate out;
  const double theta_p = estimate_theta(phi, tau, tau_p);
  out.vte = wald_from_influence(theta_p, theta_influence(phi, tau, tau_p), critical_value(level));
  out.negative = theta_p < 0;
  out.root = std::sqrt(std::max(theta_p, 0.0));
  out.root_ci = {std::sqrt(std::max(out.vte.ci.lower, 0.0)), std::sqrt(std::max(out.vte.ci.upper, 0.0))};
  return out;
}

ScalarEstimate estimate_var_tau_s(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau_s,
                                  const Eigen::VectorXd& tau_p, double level) {
  // Same terms as Theta with the roles of tau and tau_s taken by tau_s and tau_p.
  const Eigen::VectorXd terms = theta_terms(phi, tau_s, tau_p);
  const double value = terms.mean();
  return wald_from_influence(value, (terms.array() - value).matrix(), critical_value(level));
}

ScalarEstimate estimate_lambda_bound(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau,
                                     const Eigen::VectorXd& tau_p, double level) {
  const double ate = ate_aipw(phi);
  if (!(ate > 0.0)) fail(ErrorKind::estimation, "the Chebyshev bound needs a positive ATE estimate");
  const double theta_p = estimate_theta(phi, tau, tau_p);
  const double lambda = theta_p / (ate * ate);
  const Eigen::VectorXd ic =
      (((phi - tau_p).array().square() - (phi - tau).array().square() - lambda * ate * (2 * phi.array() - ate)) /
       (ate * ate))
          .matrix();
  return wald_from_influence(lambda, ic, critical_value(level));
}

NullTestResult split_sample_null_test(const Dataset& data, const AlgorithmConfig& cfg, const CovariateSubset& subset) {
  if (data.mode() != TreatmentMode::binary) fail(ErrorKind::config, "the split-sample test needs binary treatment");
  const std::span<const double> arms(data.treatment().data(), static_cast<std::size_t>(data.n()));
  return split_sample_null_test(data, cfg, subset, make_folds(data.n(), 2, arms, derive_seed(cfg.seed, {stage::null_split})));
}

NullTestResult split_sample_null_test(const Dataset& data, const AlgorithmConfig& cfg, const CovariateSubset& subset,
                                      const FoldAssignment& halves) {
  if (halves.folds != 2 || halves.n() != data.n()) fail(ErrorKind::contract, "null test needs a two-way split of the data");
  NullTestResult out{.subset = subset};
  auto half_cfg = cfg;
  half_cfg.subsets = {subset};

  auto run_half = [&](int half) {
    const auto rows = halves.members(half);
    Dataset part = [&] {
      try {
        return data.rows(rows);
      } catch (const Error& e) {
        throw Error(ErrorKind::config, "null test half " + std::to_string(half) + ": " + e.what());
      }
    }();
    half_cfg.seed = derive_seed(cfg.seed, {stage::null_split, static_cast<std::uint64_t>(half)});
    try {
      return std::make_pair(run_algorithm(part, half_cfg), part.n());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::config)
        throw Error(ErrorKind::config, "null test half " + std::to_string(half) + ": " + e.what());
      throw;
    }
  };

  const auto [first, n1] = run_half(1);
  const auto [second, n2] = run_half(2);
  out.n_first = n1;
  out.n_second = n2;
  const auto vte = estimate_vte(first.phi, first.tau, first.tau_p).vte;
  const auto var_s = estimate_var_tau_s(second.phi, second.tau_for(subset), second.tau_p);
  out.vte_first_half = vte.value;
  out.var_tau_s_second_half = var_s.value;
  out.difference = vte.value - var_s.value;
  out.se = std::sqrt(vte.variance + var_s.variance);
  if (!(out.se > 0.0)) fail(ErrorKind::estimation, "split-sample test has zero variance");
  out.statistic = out.difference / out.se;
  out.p_value = normal_sf(out.statistic);
  return out;
}

}  // namespace tevim
