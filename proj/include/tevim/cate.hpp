#pragma once

#include "tevim/data.hpp"
#include "tevim/learners.hpp"
#include "tevim/nuisance.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace tevim {

enum class CateVariant { t_learner, dr_learner };

/// tau(x) evaluable on p-column covariate rows.
class CateModel {
 public:
  /// T-learner: mu1(x) - mu0(x).
  CateModel(FittedModel mu1, FittedModel mu0);
  /// A single model of tau(x): the DR-learner regression of pseudo-outcomes
  /// on X, or a directly estimated contrast function.
  explicit CateModel(FittedModel regression, CateVariant kind = CateVariant::dr_learner);

  CateVariant kind() const noexcept { return kind_; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

 private:
  CateVariant kind_;
  FittedModel first_;
  std::optional<FittedModel> second_;
};

CateModel t_learner(const NuisanceFits& fits);

/// Regression of pseudo-outcomes on all covariates, fit on the same rows
/// that produced the pseudo-outcomes.
CateModel dr_learner(const Eigen::VectorXd& phi, const Eigen::MatrixXd& X, const LearnerSpec& spec, std::uint64_t seed);

/// tau_s: a regression of tau(x_i) on X_{-s}. For the full set this is the
/// constant mean of tau_values (tau_p).
class SubsetCateModel {
 public:
  SubsetCateModel(CovariateSubset subset, FittedModel model);

  const CovariateSubset& subset() const noexcept { return subset_; }
  const FittedModel& model() const noexcept { return model_; }

  /// Evaluates on full p-column rows; only X_{-s} is read.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

 private:
  CovariateSubset subset_;
  FittedModel model_;
};

SubsetCateModel subset_cate(const Eigen::VectorXd& tau_values, const Eigen::MatrixXd& X, const CovariateSubset& subset,
                            const LearnerSpec& spec, std::uint64_t seed);

/// Headline ATE: mean of the pseudo-outcomes.
double ate_aipw(const Eigen::VectorXd& phi);

}  // namespace tevim
