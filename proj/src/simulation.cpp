#include "tevim/simulation.hpp"

#include "tevim/error.hpp"
#include "tevim/parallel.hpp"
#include "tevim/pseudo_outcome.hpp"
#include "tevim/seeding.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace tevim {

double expit(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace study_dgp {

double tau(double x1, double x2) { return x1 * x1 * (x1 + 7.0 / 5.0) + 25.0 * x2 * x2 / 9.0; }

double propensity(double x1, double x2) { return expit(-0.4 * x1 + 0.1 * x1 * x2); }

double baseline(double x1, double x2) { return x1 * x2 + 2 * x2 * x2 - x1; }

}  // namespace study_dgp

DgpSample generate_dgp(Eigen::Index n, std::uint64_t seed) {
  if (n < 2) fail(ErrorKind::config, "simulated datasets need n >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd a(n), y(n), tau(n), pi(n), mu0(n), mu1(n);
  // Redraw in the (vanishingly rare) event that one arm is empty.
  for (;;) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x1 = uniform(rng);
      const double x2 = uniform(rng);
      X(i, 0) = x1;
      X(i, 1) = x2;
      tau[i] = study_dgp::tau(x1, x2);
      pi[i] = study_dgp::propensity(x1, x2);
      mu0[i] = study_dgp::baseline(x1, x2);
      mu1[i] = mu0[i] + tau[i];
      a[i] = std::bernoulli_distribution(pi[i])(rng) ? 1.0 : 0.0;
      y[i] = (a[i] == 1.0 ? mu1[i] : mu0[i]) + noise(rng);
    }
    const double treated = a.sum();
    if (treated > 0 && treated < static_cast<double>(n)) break;
  }
  return DgpSample{Dataset(std::move(y), std::move(a), std::move(X), {"x1", "x2"}), std::move(tau), std::move(pi),
                   std::move(mu0), std::move(mu1)};
}

namespace {

Eigen::VectorXd midpoint_nodes(int points) {
  Eigen::VectorXd nodes(points);
  for (int k = 0; k < points; ++k) nodes[k] = -1.0 + (2.0 * k + 1.0) / points;
  return nodes;
}

}  // namespace

TrueValues true_values(int points_per_axis) {
  if (points_per_axis < 1000) fail(ErrorKind::config, "quadrature needs at least 1000 points per axis");
  const int m = points_per_axis;
  const Eigen::VectorXd u = midpoint_nodes(m);
  Eigen::MatrixXd tau(m, m);  // tau(i, j) = tau(u_i, u_j)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) tau(i, j) = study_dgp::tau(u[i], u[j]);

  TrueValues out;
  out.points_per_axis = m;
  out.ate = tau.mean();
  out.vte = (tau.array() - out.ate).square().mean();
  // s = {1}: average over x1 (rows) for each x2; s = {2}: over x2 (columns).
  const Eigen::RowVectorXd tau_s1 = tau.colwise().mean();
  const Eigen::VectorXd tau_s2 = tau.rowwise().mean();
  out.theta1 = (tau.rowwise() - tau_s1).array().square().mean();
  out.theta2 = (tau.colwise() - tau_s2).array().square().mean();
  out.psi1 = out.theta1 / out.vte;
  out.psi2 = out.theta2 / out.vte;
  out.lambda = out.vte / (out.ate * out.ate);
  return out;
}

Eigen::VectorXd conditional_tau(const Eigen::MatrixXd& X, const CovariateSubset& s, int points_per_axis) {
  if (X.cols() != 2 || s.p() != 2) fail(ErrorKind::contract, "the study model has two covariates");
  if (points_per_axis < 1) fail(ErrorKind::config, "quadrature needs at least one point per axis");
  const Eigen::VectorXd u = midpoint_nodes(points_per_axis);
  const bool over1 = s.contains(1);
  const bool over2 = s.contains(2);
  Eigen::VectorXd out(X.rows());
  if (over1 && over2) {
    double sum = 0.0;
    for (int a = 0; a < points_per_axis; ++a)
      for (int b = 0; b < points_per_axis; ++b) sum += study_dgp::tau(u[a], u[b]);
    out.setConstant(sum / (static_cast<double>(points_per_axis) * points_per_axis));
    return out;
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (!over1 && !over2) {
      out[i] = study_dgp::tau(X(i, 0), X(i, 1));
      continue;
    }
    double sum = 0.0;
    for (int k = 0; k < points_per_axis; ++k)
      sum += over1 ? study_dgp::tau(u[k], X(i, 1)) : study_dgp::tau(X(i, 0), u[k]);
    out[i] = sum / points_per_axis;
  }
  return out;
}

// ---------------------------------------------------------------------------

DiscreteDgp::DiscreteDgp(int p, std::vector<double> tau, std::vector<double> baseline, std::vector<double> propensity)
    : p_(p), tau_(std::move(tau)), baseline_(std::move(baseline)), propensity_(std::move(propensity)) {
  if (p_ < 1 || p_ > 16) fail(ErrorKind::config, "discrete model supports 1 <= p <= 16");
  const std::size_t size = std::size_t{1} << p_;
  if (tau_.size() != size || baseline_.size() != size || propensity_.size() != size)
    fail(ErrorKind::config, "discrete model tables need 2^p entries");
  for (double q : propensity_)
    if (!(q > 0.0 && q < 1.0)) fail(ErrorKind::config, "discrete model propensities must lie in (0, 1)");
}

double DiscreteDgp::ate() const {
  double s = 0.0;
  for (double t : tau_) s += t;
  return s / static_cast<double>(tau_.size());
}

double DiscreteDgp::vte() const { return theta(CovariateSubset::full(p_)); }

double DiscreteDgp::tau_s(const CovariateSubset& s, std::size_t point) const {
  std::size_t mask = 0;
  for (int j : s.indices()) mask |= std::size_t{1} << (j - 1);
  const std::size_t fixed = point & ~mask;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t q = 0; q < tau_.size(); ++q)
    if ((q & ~mask) == fixed) {
      sum += tau_[q];
      ++count;
    }
  return sum / static_cast<double>(count);
}

double DiscreteDgp::theta(const CovariateSubset& s) const {
  double sum = 0.0;
  for (std::size_t q = 0; q < tau_.size(); ++q) {
    const double d = tau_[q] - tau_s(s, q);
    sum += d * d;
  }
  return sum / static_cast<double>(tau_.size());
}

double DiscreteDgp::psi(const CovariateSubset& s) const { return theta(s) / vte(); }

double DiscreteDgp::var_tau_s(const CovariateSubset& s) const {
  const double mean = ate();
  double sum = 0.0;
  for (std::size_t q = 0; q < tau_.size(); ++q) {
    const double d = tau_s(s, q) - mean;
    sum += d * d;
  }
  return sum / static_cast<double>(tau_.size());
}

std::size_t DiscreteDgp::point_of(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::size_t q = 0;
  for (int j = 0; j < p_; ++j)
    if (x[j] != 0.0) q |= std::size_t{1} << j;
  return q;
}

Eigen::VectorXd DiscreteDgp::tau_s_at(const Eigen::MatrixXd& X, const CovariateSubset& s) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = tau_s(s, point_of(X.row(i)));
  return out;
}

DgpSample DiscreteDgp::sample(Eigen::Index n, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> point(0, tau_.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd X(n, p_);
  Eigen::VectorXd a(n), y(n), tau(n), pi(n), mu0(n), mu1(n);
  for (;;) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t q = point(rng);
      for (int j = 0; j < p_; ++j) X(i, j) = static_cast<double>((q >> j) & 1U);
      tau[i] = tau_[q];
      pi[i] = propensity_[q];
      mu0[i] = baseline_[q];
      mu1[i] = baseline_[q] + tau_[q];
      a[i] = std::bernoulli_distribution(pi[i])(rng) ? 1.0 : 0.0;
      y[i] = (a[i] == 1.0 ? mu1[i] : mu0[i]) + noise(rng);
    }
    const double treated = a.sum();
    if (treated > 0 && treated < static_cast<double>(n)) break;
  }
  std::vector<std::string> names;
  for (int j = 1; j <= p_; ++j) names.push_back("x" + std::to_string(j));
  return DgpSample{Dataset(std::move(y), std::move(a), std::move(X), std::move(names)), std::move(tau), std::move(pi),
                   std::move(mu0), std::move(mu1)};
}

// ---------------------------------------------------------------------------

LearnerSet flexible_learner_set() {
  return LearnerSet{"ridge_basis", default_flexible_learner(), LearnerSpec{default_flexible_learner()},
                    default_flexible_learner(), default_flexible_learner()};
}

LearnerSet boosted_learner_set() {
  const LearnerSpec trees = BoostedTreesSpec{};
  return LearnerSet{"boosted_trees", trees, trees, trees, trees};
}

void McGrid::use_full_scale() {
  sizes = {500, 1000, 2000, 3000, 4000};
  replicates = 1000;
}

namespace {

const std::vector<CovariateSubset>& study_subsets() {
  static const std::vector<CovariateSubset> subsets{CovariateSubset({1}, 2), CovariateSubset({2}, 2)};
  return subsets;
}

}  // namespace

std::vector<TevimEstimate> estimate_replicate(const DgpSample& sample, const AlgorithmConfig& cfg) {
  const auto est = run_algorithm(sample.data, cfg);
  std::vector<TevimEstimate> out;
  for (const auto& s : study_subsets()) {
    auto t = estimate_psi(est.phi, est.tau, est.tau_for(s), est.tau_p);
    t.subset = s;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TevimEstimate> oracle_replicate(const DgpSample& sample, const AlgorithmConfig&) {
  const auto& d = sample.data;
  const Eigen::VectorXd phi = aipw_pseudo_outcome(d.outcome(), d.treatment(), sample.mu0, sample.mu1, sample.propensity);
  const Eigen::VectorXd tau_p = conditional_tau(d.covariates(), CovariateSubset::full(2));
  std::vector<TevimEstimate> out;
  for (const auto& s : study_subsets()) {
    auto t = estimate_psi(phi, sample.tau, conditional_tau(d.covariates(), s), tau_p);
    t.subset = s;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<McRow> monte_carlo(const McGrid& grid, const ReplicateEstimator& estimator) {
  if (grid.replicates < 1) fail(ErrorKind::config, "Monte Carlo needs at least one replicate");
  if (grid.algorithms.empty() || grid.learners.empty() || grid.sizes.empty())
    fail(ErrorKind::config, "Monte Carlo grid is empty");
  const auto truth = true_values(grid.quadrature_points);
  const double truths[2] = {truth.psi1, truth.psi2};
  const auto& subsets = study_subsets();

  const std::size_t n_alg = grid.algorithms.size();
  const std::size_t n_learn = grid.learners.size();
  const auto reps = static_cast<std::size_t>(grid.replicates);

  struct Outcome {
    bool ok = false;
    std::vector<TevimEstimate> estimates;
  };

  std::vector<McRow> rows;
  std::vector<std::vector<std::vector<Outcome>>> results(grid.sizes.size());
  for (std::size_t si = 0; si < grid.sizes.size(); ++si) {
    const auto n = grid.sizes[si];
    auto& cell = results[si];
    cell.assign(n_alg * n_learn, std::vector<Outcome>(reps));
    parallel_for(reps, grid.threads, [&](std::size_t r) {
      const std::uint64_t data_seed = derive_seed(grid.seed, {stage::data, static_cast<std::uint64_t>(n), r});
      const DgpSample sample = generate_dgp(n, data_seed);
      for (std::size_t a = 0; a < n_alg; ++a)
        for (std::size_t l = 0; l < n_learn; ++l) {
          const auto& set = grid.learners[l];
          AlgorithmConfig cfg;
          cfg.algorithm = grid.algorithms[a];
          cfg.folds = grid.folds;
          cfg.subsets = subsets;
          cfg.outcome = set.outcome;
          cfg.propensity = set.propensity;
          cfg.cate = set.cate;
          cfg.subset = set.subset;
          cfg.clip = grid.clip;
          cfg.seed = derive_seed(data_seed, {stage::estimator});
          auto& slot = cell[a * n_learn + l][r];
          try {
            slot.estimates = estimator(sample, cfg);
            slot.ok = slot.estimates.size() == subsets.size();
          } catch (const Error&) {
            slot.ok = false;
          }
        }
    });
  }

  for (std::size_t a = 0; a < n_alg; ++a)
    for (std::size_t l = 0; l < n_learn; ++l)
      for (std::size_t si = 0; si < grid.sizes.size(); ++si)
        for (std::size_t k = 0; k < subsets.size(); ++k) {
          const auto& outcomes = results[si][a * n_learn + l];
          McRow row;
          row.variant = grid.algorithms[a].label();
          row.learner = grid.learners[l].name;
          row.n = grid.sizes[si];
          row.subset = subsets[k];
          row.truth = truths[k];
          std::vector<double> psi;
          int covered = 0;
          for (const auto& o : outcomes) {
            if (!o.ok) {
              ++row.failures;
              continue;
            }
            const auto& e = o.estimates[k];
            psi.push_back(e.psi);
            covered += e.ci_raw.lower <= row.truth && row.truth <= e.ci_raw.upper;
          }
          row.replicates = static_cast<int>(psi.size());
          if (!psi.empty()) {
            // Shifted by the first value so identical estimates give exactly zero spread.
            const double m = static_cast<double>(psi.size());
            const double shift = psi.front();
            double offset = 0.0;
            for (double v : psi) offset += v - shift;
            offset /= m;
            const double mean = shift + offset;
            double ss = 0.0;
            for (double v : psi) ss += (v - shift - offset) * (v - shift - offset);
            const double nn = static_cast<double>(row.n);
            row.mean_psi = mean;
            row.scaled_bias = std::sqrt(nn) * (mean - row.truth);
            row.scaled_variance = psi.size() > 1 ? nn * ss / (m - 1) : 0.0;
            row.coverage = covered / m;
          }
          rows.push_back(std::move(row));
        }
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<McRow>& rows) {
  out << "variant,learner,n,subset,scaled_bias,scaled_variance,coverage,replicates\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.learner << ',' << r.n << ",\"" << r.subset.to_string() << "\","
        << format_double(r.scaled_bias) << ',' << format_double(r.scaled_variance) << ','
        << format_double(r.coverage) << ',' << r.replicates << '\n';
  }
}

}  // namespace tevim
