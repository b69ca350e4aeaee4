#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

namespace tevim {

/// k nearest neighbours on standardized features; prediction is the mean
/// target of the k closest training rows (ties broken by target value).
struct KnnSpec {
  int k = 20;
  friend bool operator==(const KnnSpec&, const KnnSpec&) = default;
};

/// Penalized least squares on a standardized polynomial basis. With
/// include_interactions every monomial of total degree <= degree is used,
/// otherwise only per-covariate powers. Objective:
///   (1/n) * ||y - b0 - B beta||^2 + penalty * ||beta||^2   (b0 unpenalized)
/// Probability fits use the same basis with a logistic link.
struct RidgeBasisSpec {
  int degree = 3;
  bool include_interactions = true;
  double penalty = 1e-4;
  friend bool operator==(const RidgeBasisSpec&, const RidgeBasisSpec&) = default;
};

/// Gradient boosted regression trees (squared error, or logistic loss for
/// probability fits).
struct BoostedTreesSpec {
  int rounds = 200;
  int max_depth = 3;
  double learning_rate = 0.05;
  int min_leaf = 10;
  double subsample_fraction = 0.8;
  friend bool operator==(const BoostedTreesSpec&, const BoostedTreesSpec&) = default;
};

/// Predicts the training mean.
struct ConstantSpec {
  friend bool operator==(const ConstantSpec&, const ConstantSpec&) = default;
};

using LearnerSpec = std::variant<KnnSpec, RidgeBasisSpec, BoostedTreesSpec, ConstantSpec>;

/// Configuration error unless every hyperparameter is in range.
void validate(const LearnerSpec& spec);

/// "knn", "ridge_basis", "boosted_trees" or "constant".
std::string learner_kind(const LearnerSpec& spec);

/// The smooth, flexible default: cubic basis with interactions.
LearnerSpec default_flexible_learner();

nlohmann::json to_json(const LearnerSpec& spec);
LearnerSpec learner_from_json(const nlohmann::json& j);

namespace detail {

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
};

}  // namespace detail

/// Immutable fitted regression function. Cheap to copy (shared state).
class FittedModel {
 public:
  using BatchFunction = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

  FittedModel(std::shared_ptr<const detail::Predictor> impl, Eigen::Index feature_count,
              std::optional<double> probability_clip = std::nullopt);

  /// A model predicting `value` everywhere on q-column inputs.
  static FittedModel constant(double value, Eigen::Index feature_count,
                              std::optional<double> probability_clip = std::nullopt);

  /// Wraps an arbitrary vectorized function, e.g. a known oracle. If a clip
  /// is given, outputs are clipped into [clip, 1 - clip].
  static FittedModel from_function(BatchFunction fn, Eigen::Index feature_count,
                                   std::optional<double> probability_clip = std::nullopt);

  /// Contract error if X.cols() != feature_count(); numeric error if the
  /// underlying predictor produces a non-finite value.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  Eigen::Index feature_count() const noexcept { return feature_count_; }
  bool is_probability() const noexcept { return clip_.has_value(); }
  std::optional<double> probability_clip() const noexcept { return clip_; }

 private:
  std::shared_ptr<const detail::Predictor> impl_;
  Eigen::Index feature_count_;
  std::optional<double> clip_;
};

/// Regression of targets on features. Deterministic in (spec, data, seed);
/// q = 0 columns always yields the training mean.
FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                std::uint64_t seed);

/// Probability regression for 0/1 targets with outputs clipped into
/// [clip, 1 - clip]. ridge_basis uses a logistic link, boosted_trees the
/// logistic loss, knn the neighbour vote share.
FittedModel fit_probability(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                            const Eigen::VectorXd& binary_targets, double clip, std::uint64_t seed);

/// Row order sorted lexicographically by (features..., target). Learners fit
/// on rows in this order so that fits do not depend on input row order.
std::vector<Eigen::Index> canonical_row_order(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets);

namespace detail {

std::shared_ptr<const Predictor> fit_boosted_trees(const BoostedTreesSpec& spec, const Eigen::MatrixXd& X,
                                                   const Eigen::VectorXd& y, bool logistic, std::uint64_t seed);

}  // namespace detail

}  // namespace tevim
