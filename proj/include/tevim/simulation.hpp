#pragma once

#include "tevim/crossfit.hpp"
#include "tevim/data.hpp"
#include "tevim/estimands.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace tevim {

/// 1 / (1 + exp(-t)) without overflow for large |t|.
double expit(double t);

/// Structural model of the two-covariate simulation study:
///   X1, X2 ~ Uniform(-1, 1)
///   A ~ Bernoulli(expit(-0.4 X1 + 0.1 X1 X2))
///   Y ~ Normal(X1 X2 + 2 X2^2 - X1 + A tau(X), 1)
///   tau(X) = X1^2 (X1 + 7/5) + 25 X2^2 / 9
namespace study_dgp {

double tau(double x1, double x2);
double propensity(double x1, double x2);
double baseline(double x1, double x2);

}  // namespace study_dgp

/// A simulated dataset with the true nuisance values at each row.
struct DgpSample {
  Dataset data;
  Eigen::VectorXd tau;
  Eigen::VectorXd propensity;
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
};

DgpSample generate_dgp(Eigen::Index n, std::uint64_t seed);

struct TrueValues {
  double psi1 = 0.0;
  double psi2 = 0.0;
  double ate = 0.0;
  double vte = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double lambda = 0.0;  // vte / ate^2
  int points_per_axis = 0;
};

/// Estimands of the study model by tensor-product midpoint quadrature over
/// [-1, 1]^2 with `points_per_axis` nodes per axis (at least 1000).
TrueValues true_values(int points_per_axis = 1000);

/// tau_s(x) = E{tau(X) | X_{-s} = x_{-s}} for the study model, by 1-d
/// midpoint quadrature over each marginalized coordinate.
Eigen::VectorXd conditional_tau(const Eigen::MatrixXd& X, const CovariateSubset& s, int points_per_axis = 1000);

/// Covariates uniform on {0,1}^p with tabulated CATE, baseline and
/// propensity, indexed by sum_j x_j 2^(j-1). Every estimand is available by
/// exact enumeration over the 2^p support points.
class DiscreteDgp {
 public:
  DiscreteDgp(int p, std::vector<double> tau, std::vector<double> baseline, std::vector<double> propensity);

  int p() const noexcept { return p_; }
  std::size_t support_size() const noexcept { return tau_.size(); }

  double ate() const;
  double vte() const;
  /// tau_s at support point `point`.
  double tau_s(const CovariateSubset& s, std::size_t point) const;
  double theta(const CovariateSubset& s) const;
  double psi(const CovariateSubset& s) const;
  double var_tau_s(const CovariateSubset& s) const;

  /// Y ~ Normal(baseline + A tau, 1).
  DgpSample sample(Eigen::Index n, std::uint64_t seed) const;

  /// Oracle tau_s evaluated at the rows of X.
  Eigen::VectorXd tau_s_at(const Eigen::MatrixXd& X, const CovariateSubset& s) const;

 private:
  std::size_t point_of(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  int p_;
  std::vector<double> tau_;
  std::vector<double> baseline_;
  std::vector<double> propensity_;
};

/// A named bundle of learners used for one Monte Carlo configuration.
struct LearnerSet {
  std::string name;
  LearnerSpec outcome;
  PropensitySpec propensity;
  LearnerSpec cate;
  LearnerSpec subset;
};

LearnerSet flexible_learner_set();
LearnerSet boosted_learner_set();

struct McGrid {
  std::vector<Eigen::Index> sizes{500, 2000};
  std::vector<Algorithm> algorithms;
  std::vector<LearnerSet> learners;
  int replicates = 200;
  int folds = 5;
  double clip = 0.01;
  std::uint64_t seed = 1;
  int threads = 1;
  int quadrature_points = 1000;

  /// 1000 replicates over n in {500, 1000, 2000, 3000, 4000}.
  void use_full_scale();
};

/// Estimates for subsets {1} and {2}, in that order, for one replicate.
using ReplicateEstimator = std::function<std::vector<TevimEstimate>(const DgpSample&, const AlgorithmConfig&)>;

/// Fits the configured algorithm to the replicate.
std::vector<TevimEstimate> estimate_replicate(const DgpSample& sample, const AlgorithmConfig& cfg);

/// Uses the true mu, pi, tau and tau_s instead of fitted models.
std::vector<TevimEstimate> oracle_replicate(const DgpSample& sample, const AlgorithmConfig& cfg);

struct McRow {
  std::string variant;
  std::string learner;
  Eigen::Index n = 0;
  CovariateSubset subset = CovariateSubset::empty(2);
  double truth = 0.0;
  double mean_psi = 0.0;
  double scaled_bias = 0.0;      // sqrt(n) (mean psi_hat - psi)
  double scaled_variance = 0.0;  // n * sample variance of psi_hat
  double coverage = 0.0;         // share of 95% intervals containing psi
  int replicates = 0;            // successful replicates
  int failures = 0;              // replicates that raised an estimation error
};

/// Runs every (algorithm, learner set, n) cell. Replicate r at size n uses
/// the same simulated dataset in every cell. Failed replicates are counted
/// and excluded from the metrics.
std::vector<McRow> monte_carlo(const McGrid& grid, const ReplicateEstimator& estimator = estimate_replicate);

/// Columns: variant,learner,n,subset,scaled_bias,scaled_variance,coverage,replicates
void write_metrics_csv(std::ostream& out, const std::vector<McRow>& rows);

}  // namespace tevim
