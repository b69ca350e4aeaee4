#include "tevim/crossfit.hpp"

#include "tevim/continuous.hpp"
#include "tevim/error.hpp"
#include "tevim/parallel.hpp"
#include "tevim/pseudo_outcome.hpp"
#include "tevim/seeding.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <variant>

namespace tevim {

std::vector<Eigen::Index> FoldAssignment::members(int fold) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) rows.push_back(static_cast<Eigen::Index>(i));
  return rows;
}

std::vector<Eigen::Index> FoldAssignment::complement(int fold) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) rows.push_back(static_cast<Eigen::Index>(i));
  return rows;
}

FoldAssignment make_folds(Eigen::Index n, int folds, std::span<const double> treatment, std::uint64_t seed) {
  if (folds < 2) fail(ErrorKind::config, "cross-fitting needs at least 2 folds");
  if (n < folds) fail(ErrorKind::config, "more folds (" + std::to_string(folds) + ") than rows (" + std::to_string(n) + ")");

  std::vector<std::vector<Eigen::Index>> strata(1);
  if (!treatment.empty()) {
    if (static_cast<Eigen::Index>(treatment.size()) != n) fail(ErrorKind::contract, "treatment length differs from n");
    strata.assign(2, {});
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = treatment[static_cast<std::size_t>(i)];
      if (a != 0.0 && a != 1.0) fail(ErrorKind::validation, "fold stratification needs a 0/1 treatment");
      strata[a == 1.0].push_back(i);
    }
    for (int a = 0; a < 2; ++a)
      if (static_cast<int>(strata[static_cast<std::size_t>(a)].size()) < folds)
        fail(ErrorKind::config, "treatment arm " + std::to_string(a) + " has " +
                                    std::to_string(strata[static_cast<std::size_t>(a)].size()) + " rows, fewer than " +
                                    std::to_string(folds) + " folds; choose a smaller K");
  } else {
    strata[0].resize(static_cast<std::size_t>(n));
    std::iota(strata[0].begin(), strata[0].end(), Eigen::Index{0});
  }

  FoldAssignment out{folds, std::vector<int>(static_cast<std::size_t>(n), 0)};
  std::mt19937_64 rng(derive_seed(seed, {stage::folds}));
  std::size_t offset = 0;
  for (auto& rows : strata) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t j = 0; j < rows.size(); ++j)
      out.fold_of[static_cast<std::size_t>(rows[j])] = static_cast<int>((offset + j) % static_cast<std::size_t>(folds)) + 1;
    offset += rows.size();
  }
  return out;
}

std::string Algorithm::label() const {
  std::string s = splitting == SampleSplitting::none ? "1" : "2";
  return s + (variant == CateVariant::t_learner ? "A" : "B");
}

Algorithm Algorithm::parse(const std::string& label) {
  if (label.size() == 2 && (label[0] == '1' || label[0] == '2') && (label[1] == 'A' || label[1] == 'B'))
    return Algorithm{label[0] == '1' ? SampleSplitting::none : SampleSplitting::cross_fit,
                     label[1] == 'A' ? CateVariant::t_learner : CateVariant::dr_learner};
  fail(ErrorKind::config, "unknown algorithm '" + label + "' (expected 1A, 1B, 2A or 2B)");
}

void validate(const AlgorithmConfig& cfg, const Dataset& data) {
  validate(cfg.outcome);
  validate(cfg.cate);
  validate(cfg.subset);
  if (const auto* spec = std::get_if<LearnerSpec>(&cfg.propensity)) validate(*spec);
  else if (const double v = std::get<KnownConstant>(cfg.propensity).value; !(v > 0.0 && v < 1.0))
    fail(ErrorKind::config, "known_constant propensity must lie in (0, 1)");
  if (!(cfg.clip > 0.0 && cfg.clip < 0.5)) fail(ErrorKind::config, "clip must lie in (0, 0.5)");
  if (!(cfg.variance_floor > 0.0)) fail(ErrorKind::config, "variance floor must be positive");
  if (cfg.algorithm.splitting == SampleSplitting::cross_fit && cfg.folds < 2)
    fail(ErrorKind::config, "cross-fitting needs at least 2 folds");
  std::set<CovariateSubset> seen;
  for (const auto& s : cfg.subsets) {
    if (s.p() != data.p())
      fail(ErrorKind::config, "subset " + s.to_string() + " was built for p = " + std::to_string(s.p()) +
                                  " but the data has p = " + std::to_string(data.p()));
    if (!seen.insert(s).second) fail(ErrorKind::config, "subset " + s.to_string() + " listed twice");
  }
}

const Eigen::VectorXd& PerObservationEstimates::tau_for(const CovariateSubset& s) const {
  for (std::size_t k = 0; k < subsets.size(); ++k)
    if (subsets[k] == s) return tau_s[k];
  fail(ErrorKind::contract, "subset " + s.to_string() + " was not estimated");
}

class StageModelsImpl {
 public:
  std::variant<NuisanceFits, ContinuousNuisance> nuisance;
  CateModel cate;
  SubsetCateModel tau_p;
  std::vector<SubsetCateModel> tau_s;

  Eigen::VectorXd pseudo_outcomes(const Dataset& rows) const {
    if (const auto* fits = std::get_if<NuisanceFits>(&nuisance)) return compute_pseudo_outcomes(rows, *fits);
    return pseudo_outcome_lambda(rows, std::get<ContinuousNuisance>(nuisance));
  }
};

PerObservationEstimates StageModels::evaluate(const Dataset& rows) const {
  const auto& X = rows.covariates();
  PerObservationEstimates out;
  out.phi = impl_->pseudo_outcomes(rows);
  out.tau = impl_->cate.predict(X);
  out.tau_p = impl_->tau_p.predict(X);
  for (const auto& model : impl_->tau_s) {
    out.subsets.push_back(model.subset());
    out.tau_s.push_back(model.predict(X));
  }
  return out;
}

StageModels fit_stage(const Dataset& train, const AlgorithmConfig& cfg, std::uint64_t seed) {
  const auto& X = train.covariates();
  const bool binary = train.mode() == TreatmentMode::binary;
  const auto variant = cfg.algorithm.variant;

  std::variant<NuisanceFits, ContinuousNuisance> nuisance =
      binary ? std::variant<NuisanceFits, ContinuousNuisance>(fit_nuisance(train, cfg.outcome, cfg.propensity, cfg.clip, seed))
             : std::variant<NuisanceFits, ContinuousNuisance>(
                   fit_continuous_nuisance(train, cfg.outcome, cfg.propensity, cfg.variance_floor, seed));

  auto cate = [&]() -> CateModel {
    if (variant == CateVariant::t_learner) {
      if (binary) return t_learner(std::get<NuisanceFits>(nuisance));
      return CateModel(std::get<ContinuousNuisance>(nuisance).lambda_x, CateVariant::t_learner);
    }
    const Eigen::VectorXd phi = binary ? compute_pseudo_outcomes(train, std::get<NuisanceFits>(nuisance))
                                       : pseudo_outcome_lambda(train, std::get<ContinuousNuisance>(nuisance));
    return dr_learner(phi, X, cfg.cate, derive_seed(seed, {stage::cate}));
  }();

  const Eigen::VectorXd tau_train = cate.predict(X);
  const int p = static_cast<int>(train.p());
  auto tau_p = subset_cate(tau_train, X, CovariateSubset::full(p), cfg.subset,
                           derive_seed(seed, {stage::subset, 0}));
  std::vector<SubsetCateModel> tau_s;
  tau_s.reserve(cfg.subsets.size());
  for (std::size_t k = 0; k < cfg.subsets.size(); ++k)
    tau_s.push_back(subset_cate(tau_train, X, cfg.subsets[k], cfg.subset, derive_seed(seed, {stage::subset, k + 1})));

  return StageModels(std::make_shared<const StageModelsImpl>(
      StageModelsImpl{std::move(nuisance), std::move(cate), std::move(tau_p), std::move(tau_s)}));
}

std::uint64_t stage_seed(const AlgorithmConfig& cfg, int fold) {
  return derive_seed(cfg.seed, {static_cast<std::uint64_t>(fold)});
}

FoldAssignment default_folds(const Dataset& data, const AlgorithmConfig& cfg) {
  std::span<const double> arms;
  if (data.mode() == TreatmentMode::binary)
    arms = std::span<const double>(data.treatment().data(), static_cast<std::size_t>(data.n()));
  return make_folds(data.n(), cfg.folds, arms, cfg.seed);
}

PerObservationEstimates run_algorithm(const Dataset& data, const AlgorithmConfig& cfg) {
  if (cfg.algorithm.splitting == SampleSplitting::none) return run_algorithm(data, cfg, FoldAssignment{});
  validate(cfg, data);
  return run_algorithm(data, cfg, default_folds(data, cfg));
}

PerObservationEstimates run_algorithm(const Dataset& data, const AlgorithmConfig& cfg, const FoldAssignment& folds) {
  validate(cfg, data);
  if (cfg.algorithm.splitting == SampleSplitting::none) return fit_stage(data, cfg, stage_seed(cfg, 0)).evaluate(data);

  if (folds.n() != data.n()) fail(ErrorKind::contract, "fold assignment does not match the data");
  const auto n = data.n();
  PerObservationEstimates out;
  out.phi.resize(n);
  out.tau.resize(n);
  out.tau_p.resize(n);
  out.subsets = cfg.subsets;
  out.tau_s.assign(cfg.subsets.size(), Eigen::VectorXd(n));

  std::vector<PerObservationEstimates> parts(static_cast<std::size_t>(folds.folds));
  std::vector<std::vector<Eigen::Index>> held_out(static_cast<std::size_t>(folds.folds));
  parallel_for(static_cast<std::size_t>(folds.folds), cfg.threads, [&](std::size_t k) {
    const int fold = static_cast<int>(k) + 1;
    held_out[k] = folds.members(fold);
    if (held_out[k].empty()) fail(ErrorKind::config, "fold " + std::to_string(fold) + " is empty");
    try {
      const auto train_rows = folds.complement(fold);
      const Dataset train = data.rows(train_rows);
      const Dataset test = data.rows(held_out[k]);
      parts[k] = fit_stage(train, cfg, stage_seed(cfg, fold)).evaluate(test);
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(fold) + ": " + e.what());
    }
  });

  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& rows = held_out[k];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      const auto j = static_cast<Eigen::Index>(r);
      out.phi[i] = parts[k].phi[j];
      out.tau[i] = parts[k].tau[j];
      out.tau_p[i] = parts[k].tau_p[j];
      for (std::size_t s = 0; s < out.tau_s.size(); ++s) out.tau_s[s][i] = parts[k].tau_s[s][j];
    }
  }
  return out;
}

}  // namespace tevim
