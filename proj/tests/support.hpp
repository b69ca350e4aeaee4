#pragma once

#include "tevim/data.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace tevim::testing {

inline double relative_gap(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// Uniform(-1, 1) covariates, Bernoulli(pi(x)) treatment, Normal noise with
/// standard deviation `noise` around mu0(x) + a * tau(x).
struct LinearDesign {
  std::function<double(const Eigen::RowVectorXd&)> mu0;
  std::function<double(const Eigen::RowVectorXd&)> tau;
  std::function<double(const Eigen::RowVectorXd&)> pi;
  double noise = 1.0;
};

inline Dataset draw(const LinearDesign& d, Eigen::Index n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> eps(0.0, d.noise);
  for (;;) {
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd a(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) X(i, j) = unif(rng);
      const Eigen::RowVectorXd x = X.row(i);
      a[i] = std::bernoulli_distribution(d.pi(x))(rng) ? 1.0 : 0.0;
      y[i] = d.mu0(x) + a[i] * d.tau(x) + eps(rng);
    }
    if (a.sum() > 0 && a.sum() < static_cast<double>(n)) {
      std::vector<std::string> names;
      for (int j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
      return Dataset(y, a, X, names);
    }
  }
}

/// Stacks a dataset on top of itself: rows i and i + n are identical.
inline Dataset duplicate(const Dataset& d) {
  const auto n = d.n();
  Eigen::VectorXd y(2 * n), a(2 * n);
  Eigen::MatrixXd X(2 * n, d.p());
  y << d.outcome(), d.outcome();
  a << d.treatment(), d.treatment();
  X << d.covariates(), d.covariates();
  return Dataset(y, a, X, d.covariate_names(), d.mode());
}

}  // namespace tevim::testing
