#include "tevim/cate.hpp"

#include "tevim/error.hpp"

namespace tevim {

CateModel::CateModel(FittedModel mu1, FittedModel mu0)
    : kind_(CateVariant::t_learner), first_(std::move(mu1)), second_(std::move(mu0)) {}

CateModel::CateModel(FittedModel regression, CateVariant kind) : kind_(kind), first_(std::move(regression)) {}

Eigen::VectorXd CateModel::predict(const Eigen::MatrixXd& X) const {
  if (second_) return first_.predict(X) - second_->predict(X);
  return first_.predict(X);
}

CateModel t_learner(const NuisanceFits& fits) { return CateModel(fits.mu1, fits.mu0); }

CateModel dr_learner(const Eigen::VectorXd& phi, const Eigen::MatrixXd& X, const LearnerSpec& spec,
                     std::uint64_t seed) {
  if (phi.size() != X.rows()) fail(ErrorKind::contract, "pseudo-outcomes and covariates disagree on row count");
  return CateModel(fit(spec, X, phi, seed));
}

SubsetCateModel::SubsetCateModel(CovariateSubset subset, FittedModel model)
    : subset_(std::move(subset)), model_(std::move(model)) {
  if (model_.feature_count() != subset_.p() - static_cast<Eigen::Index>(subset_.size()))
    fail(ErrorKind::contract, "subset CATE model has the wrong number of features");
}

Eigen::VectorXd SubsetCateModel::predict(const Eigen::MatrixXd& X) const {
  return model_.predict(drop_columns(X, subset_));
}

SubsetCateModel subset_cate(const Eigen::VectorXd& tau_values, const Eigen::MatrixXd& X, const CovariateSubset& subset,
                            const LearnerSpec& spec, std::uint64_t seed) {
  if (tau_values.size() != X.rows()) fail(ErrorKind::contract, "CATE values and covariates disagree on row count");
  return SubsetCateModel(subset, fit(spec, drop_columns(X, subset), tau_values, seed));
}

double ate_aipw(const Eigen::VectorXd& phi) {
  if (phi.size() == 0) fail(ErrorKind::contract, "ATE of an empty sample");
  return phi.mean();
}

}  // namespace tevim
