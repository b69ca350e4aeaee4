#pragma once

#include "tevim/crossfit.hpp"
#include "tevim/data.hpp"
#include "tevim/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace tevim {

/// Two-sided critical value used for 95% intervals.
inline constexpr double kZ95 = 1.959964;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// A scalar with IC-based variance and Wald inference for H0: value = 0.
struct ScalarEstimate {
  double value = 0.0;
  double variance = 0.0;
  double se = 0.0;
  Interval ci;
  double p_value = 1.0;
};

/// VTE plus its square-root summary (point and CI endpoints truncated at 0
/// before taking the root).
struct VteEstimate {
  ScalarEstimate vte;
  double root = 0.0;
  Interval root_ci;
  bool negative = false;
};

struct TevimEstimate {
  CovariateSubset subset = CovariateSubset::empty(1);
  double theta_s = 0.0;
  double theta_p = 0.0;
  double psi = 0.0;
  double var_psi = 0.0;
  double se = 0.0;
  Interval ci_raw;
  Interval ci_truncated;  // ci_raw clipped to [0, 1]
  double p_value_wald = 1.0;
  Eigen::Index n = 0;
  bool negative_theta_s = false;
  bool negative_vte = false;
  /// The VTE interval contains zero, so the ratio is poorly identified.
  bool degenerate_vte = false;
};

namespace detail {

template <class A, class B>
void require_same_length(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) fail(ErrorKind::contract, "estimator inputs have different lengths");
  if (a.size() == 0) fail(ErrorKind::contract, "estimator inputs are empty");
}

}  // namespace detail

/// Per-row terms {phi - tau_s}^2 - {phi - tau}^2, whose mean is Theta_s.
template <class Phi, class Tau, class TauS>
Eigen::Matrix<typename Phi::Scalar, Eigen::Dynamic, 1> theta_terms(const Eigen::MatrixBase<Phi>& phi,
                                                                  const Eigen::MatrixBase<Tau>& tau,
                                                                  const Eigen::MatrixBase<TauS>& tau_s) {
  detail::require_same_length(phi, tau);
  detail::require_same_length(phi, tau_s);
  return ((phi - tau_s).array().square() - (phi - tau).array().square()).matrix();
}

/// One-step estimate of Theta_s = E[{tau(X) - tau_s(X)}^2]. Returned raw,
/// so it can be negative in finite samples.
template <class Phi, class Tau, class TauS>
typename Phi::Scalar estimate_theta(const Eigen::MatrixBase<Phi>& phi, const Eigen::MatrixBase<Tau>& tau,
                                    const Eigen::MatrixBase<TauS>& tau_s) {
  return theta_terms(phi, tau, tau_s).mean();
}

/// Estimated influence curve of Theta_s at each row; sums to zero.
template <class Phi, class Tau, class TauS>
Eigen::Matrix<typename Phi::Scalar, Eigen::Dynamic, 1> theta_influence(const Eigen::MatrixBase<Phi>& phi,
                                                                      const Eigen::MatrixBase<Tau>& tau,
                                                                      const Eigen::MatrixBase<TauS>& tau_s) {
  auto terms = theta_terms(phi, tau, tau_s);
  return (terms.array() - terms.mean()).matrix();
}

/// Estimated influence curve of Psi_s at each row:
///   [{phi - tau_s}^2 - Psi {phi - tau_p}^2 + (Psi - 1) {phi - tau}^2] / Theta_p
template <class Phi, class Tau, class TauS, class TauP>
Eigen::Matrix<typename Phi::Scalar, Eigen::Dynamic, 1> psi_influence(const Eigen::MatrixBase<Phi>& phi,
                                                                    const Eigen::MatrixBase<Tau>& tau,
                                                                    const Eigen::MatrixBase<TauS>& tau_s,
                                                                    const Eigen::MatrixBase<TauP>& tau_p,
                                                                    typename Phi::Scalar psi,
                                                                    typename Phi::Scalar theta_p) {
  detail::require_same_length(phi, tau_p);
  detail::require_same_length(phi, tau_s);
  detail::require_same_length(phi, tau);
  return (((phi - tau_s).array().square() - psi * (phi - tau_p).array().square() +
           (psi - 1) * (phi - tau).array().square()) /
          theta_p)
      .matrix();
}

/// Wald summary of an estimate with variance n^-2 sum(ic^2).
template <class Ic>
ScalarEstimate wald_from_influence(double value, const Eigen::MatrixBase<Ic>& ic, double z = kZ95) {
  const double n = static_cast<double>(ic.size());
  ScalarEstimate out;
  out.value = value;
  out.variance = ic.squaredNorm() / (n * n);
  out.se = std::sqrt(out.variance);
  out.ci = {value - z * out.se, value + z * out.se};
  if (out.se > 0) out.p_value = std::erfc(std::abs(value / out.se) / std::sqrt(2.0));
  else out.p_value = value == 0.0 ? 1.0 : 0.0;
  return out;
}

/// Psi_s = Theta_s / Theta_p with IC-based variance, Wald interval (raw and
/// truncated to [0, 1]) and two-sided Wald p-value for Psi_s = 0.
/// Estimation error if Theta_p is exactly zero.
TevimEstimate estimate_psi(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau, const Eigen::VectorXd& tau_s,
                           const Eigen::VectorXd& tau_p, double level = 0.95);

/// AIPW ATE: mean(phi), variance n^-2 sum (phi - mean)^2.
ScalarEstimate estimate_ate(const Eigen::VectorXd& phi, double level = 0.95);

/// VTE Theta_p (Theta_s with tau_s := tau_p) and its square-root summary.
VteEstimate estimate_vte(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau, const Eigen::VectorXd& tau_p,
                         double level = 0.95);

/// var{tau_s(X)} = Theta_p - Theta_s, estimated directly from
/// n^-1 sum [{phi - tau_p}^2 - {phi - tau_s}^2].
ScalarEstimate estimate_var_tau_s(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau_s,
                                  const Eigen::VectorXd& tau_p, double level = 0.95);

/// Chebyshev bound Lambda = Theta_p / ate^2 on Pr{tau(X) <= 0}, with
/// ate = mean(phi). Estimation error unless ate > 0.
ScalarEstimate estimate_lambda_bound(const Eigen::VectorXd& phi, const Eigen::VectorXd& tau,
                                     const Eigen::VectorXd& tau_p, double level = 0.95);

struct NullTestResult {
  CovariateSubset subset = CovariateSubset::empty(1);
  double vte_first_half = 0.0;        // var{tau(X)} from the first half
  double var_tau_s_second_half = 0.0;  // var{tau_s(X)} from the second half
  double difference = 0.0;
  double se = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;  // upper tail, H0: Theta_s = 0
  Eigen::Index n_first = 0;
  Eigen::Index n_second = 0;
};

/// Split-sample test of zero importance. The data are split into two
/// arm-stratified halves; var{tau(X)} is estimated on the first half and
/// var{tau_s(X)} on the second, each with the configured algorithm, and the
/// standardized difference is referred to the normal upper tail.
NullTestResult split_sample_null_test(const Dataset& data, const AlgorithmConfig& cfg, const CovariateSubset& subset);

/// As above with explicit halves (fold 1 and fold 2 of `halves`).
NullTestResult split_sample_null_test(const Dataset& data, const AlgorithmConfig& cfg, const CovariateSubset& subset,
                                      const FoldAssignment& halves);

}  // namespace tevim
