#pragma once

#include "tevim/cate.hpp"
#include "tevim/data.hpp"
#include "tevim/learners.hpp"
#include "tevim/nuisance.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tevim {

/// Partition of rows 0..n-1 into folds labelled 1..K.
struct FoldAssignment {
  int folds = 0;
  std::vector<int> fold_of;

  Eigen::Index n() const noexcept { return static_cast<Eigen::Index>(fold_of.size()); }
  std::vector<Eigen::Index> members(int fold) const;
  std::vector<Eigen::Index> complement(int fold) const;
};

/// Seeded random partition into K folds. With a non-empty binary treatment
/// vector the partition is stratified: within each arm fold sizes differ by
/// at most one. Configuration error if an arm has fewer than K members.
FoldAssignment make_folds(Eigen::Index n, int folds, std::span<const double> treatment, std::uint64_t seed);

enum class SampleSplitting { none, cross_fit };

/// One of the four estimation algorithms: 1A, 1B (no splitting) and 2A, 2B
/// (cross-fitting), where A uses the T-learner and B the DR-learner.
struct Algorithm {
  SampleSplitting splitting = SampleSplitting::cross_fit;
  CateVariant variant = CateVariant::dr_learner;

  std::string label() const;
  static Algorithm parse(const std::string& label);
  friend bool operator==(const Algorithm&, const Algorithm&) = default;
};

struct AlgorithmConfig {
  Algorithm algorithm;
  int folds = 5;
  /// Subsets of interest; the full set is always handled separately.
  std::vector<CovariateSubset> subsets;
  LearnerSpec outcome = default_flexible_learner();
  PropensitySpec propensity = LearnerSpec{default_flexible_learner()};
  LearnerSpec cate = default_flexible_learner();
  LearnerSpec subset = default_flexible_learner();
  double clip = 0.01;
  /// Floor for var(A|X) estimates in continuous mode.
  double variance_floor = 1e-3;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Configuration error if the config cannot be applied to `data`.
void validate(const AlgorithmConfig& cfg, const Dataset& data);

/// Per-row pseudo-outcome and CATE estimates, aligned with dataset rows.
struct PerObservationEstimates {
  Eigen::VectorXd phi;
  Eigen::VectorXd tau;
  Eigen::VectorXd tau_p;
  std::vector<CovariateSubset> subsets;
  std::vector<Eigen::VectorXd> tau_s;

  /// Contract error if the subset was not estimated.
  const Eigen::VectorXd& tau_for(const CovariateSubset& s) const;
};

class StageModelsImpl;

/// All models fitted on one training set: nuisances, CATE, subset CATEs
/// and the constant tau_p.
class StageModels {
 public:
  explicit StageModels(std::shared_ptr<const StageModelsImpl> impl) : impl_(std::move(impl)) {}

  /// Evaluates every quantity at the given rows.
  PerObservationEstimates evaluate(const Dataset& rows) const;

 private:
  std::shared_ptr<const StageModelsImpl> impl_;
};

/// Fits every model of one algorithm pass on `train`. `stage_seed` seeds all
/// learners in the pass.
StageModels fit_stage(const Dataset& train, const AlgorithmConfig& cfg, std::uint64_t stage_seed);

/// Seed used for the pass that excludes fold `fold` (0 for no splitting).
std::uint64_t stage_seed(const AlgorithmConfig& cfg, int fold);

/// Runs the configured algorithm. Cross-fitting uses folds from make_folds
/// (arm-stratified in binary mode) seeded from cfg.seed.
PerObservationEstimates run_algorithm(const Dataset& data, const AlgorithmConfig& cfg);

/// As above with an explicit fold assignment (ignored without splitting).
PerObservationEstimates run_algorithm(const Dataset& data, const AlgorithmConfig& cfg, const FoldAssignment& folds);

/// Fold assignment run_algorithm would use for this data and config.
FoldAssignment default_folds(const Dataset& data, const AlgorithmConfig& cfg);

}  // namespace tevim
