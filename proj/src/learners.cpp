#include "tevim/learners.hpp"

#include "tevim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tevim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorKind::config, std::string(what) + " must be finite");
}

}  // namespace

void validate(const LearnerSpec& spec) {
  std::visit(overloaded{
                 [](const KnnSpec& s) {
                   if (s.k < 1) fail(ErrorKind::config, "knn: k must be a positive integer");
                 },
                 [](const RidgeBasisSpec& s) {
                   if (s.degree < 1) fail(ErrorKind::config, "ridge_basis: degree must be >= 1");
                   if (s.degree > 8) fail(ErrorKind::config, "ridge_basis: degree must be <= 8");
                   require_finite(s.penalty, "ridge_basis: penalty");
                   if (s.penalty < 0) fail(ErrorKind::config, "ridge_basis: penalty must be >= 0");
                 },
                 [](const BoostedTreesSpec& s) {
                   if (s.rounds < 0) fail(ErrorKind::config, "boosted_trees: rounds must be >= 0");
                   if (s.max_depth < 1) fail(ErrorKind::config, "boosted_trees: max_depth must be >= 1");
                   require_finite(s.learning_rate, "boosted_trees: learning_rate");
                   if (s.learning_rate <= 0 || s.learning_rate > 1)
                     fail(ErrorKind::config, "boosted_trees: learning_rate must lie in (0, 1]");
                   if (s.min_leaf < 1) fail(ErrorKind::config, "boosted_trees: min_leaf must be >= 1");
                   require_finite(s.subsample_fraction, "boosted_trees: subsample_fraction");
                   if (s.subsample_fraction <= 0 || s.subsample_fraction > 1)
                     fail(ErrorKind::config, "boosted_trees: subsample_fraction must lie in (0, 1]");
                 },
                 [](const ConstantSpec&) {},
             },
             spec);
}

std::string learner_kind(const LearnerSpec& spec) {
  return std::visit(overloaded{
                        [](const KnnSpec&) { return std::string("knn"); },
                        [](const RidgeBasisSpec&) { return std::string("ridge_basis"); },
                        [](const BoostedTreesSpec&) { return std::string("boosted_trees"); },
                        [](const ConstantSpec&) { return std::string("constant"); },
                    },
                    spec);
}

LearnerSpec default_flexible_learner() { return RidgeBasisSpec{}; }

nlohmann::json to_json(const LearnerSpec& spec) {
  return std::visit(overloaded{
                        [](const KnnSpec& s) { return nlohmann::json{{"type", "knn"}, {"k", s.k}}; },
                        [](const RidgeBasisSpec& s) {
                          return nlohmann::json{{"type", "ridge_basis"},
                                                {"degree", s.degree},
                                                {"include_interactions", s.include_interactions},
                                                {"penalty", s.penalty}};
                        },
                        [](const BoostedTreesSpec& s) {
                          return nlohmann::json{{"type", "boosted_trees"},
                                                {"rounds", s.rounds},
                                                {"max_depth", s.max_depth},
                                                {"learning_rate", s.learning_rate},
                                                {"min_leaf", s.min_leaf},
                                                {"subsample_fraction", s.subsample_fraction}};
                        },
                        [](const ConstantSpec&) { return nlohmann::json{{"type", "constant"}}; },
                    },
                    spec);
}

namespace {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, std::string("learner field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(ErrorKind::config, "unknown learner field '" + key + "'");
  }
}

}  // namespace

LearnerSpec learner_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    fail(ErrorKind::config, "learner spec must be an object with a string 'type'");
  const auto type = j.at("type").get<std::string>();
  LearnerSpec spec;
  if (type == "knn") {
    reject_unknown(j, {"type", "k"});
    KnnSpec s;
    read_field(j, "k", s.k);
    spec = s;
  } else if (type == "ridge_basis") {
    reject_unknown(j, {"type", "degree", "include_interactions", "penalty"});
    RidgeBasisSpec s;
    read_field(j, "degree", s.degree);
    read_field(j, "include_interactions", s.include_interactions);
    read_field(j, "penalty", s.penalty);
    spec = s;
  } else if (type == "boosted_trees") {
    reject_unknown(j, {"type", "rounds", "max_depth", "learning_rate", "min_leaf", "subsample_fraction"});
    BoostedTreesSpec s;
    read_field(j, "rounds", s.rounds);
    read_field(j, "max_depth", s.max_depth);
    read_field(j, "learning_rate", s.learning_rate);
    read_field(j, "min_leaf", s.min_leaf);
    read_field(j, "subsample_fraction", s.subsample_fraction);
    spec = s;
  } else if (type == "constant") {
    reject_unknown(j, {"type"});
    spec = ConstantSpec{};
  } else {
    fail(ErrorKind::config, "unknown learner type '" + type + "'");
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// FittedModel

namespace {

class ConstantPredictor final : public detail::Predictor {
 public:
  explicit ConstantPredictor(double value) : value_(value) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return Eigen::VectorXd::Constant(X.rows(), value_);
  }

 private:
  double value_;
};

class FunctionPredictor final : public detail::Predictor {
 public:
  explicit FunctionPredictor(FittedModel::BatchFunction fn) : fn_(std::move(fn)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return fn_(X); }

 private:
  FittedModel::BatchFunction fn_;
};

}  // namespace

FittedModel::FittedModel(std::shared_ptr<const detail::Predictor> impl, Eigen::Index feature_count,
                         std::optional<double> probability_clip)
    : impl_(std::move(impl)), feature_count_(feature_count), clip_(probability_clip) {
  if (!impl_) fail(ErrorKind::contract, "fitted model without a predictor");
  if (clip_ && !(*clip_ > 0.0 && *clip_ < 0.5))
    fail(ErrorKind::config, "probability clip must lie in (0, 0.5)");
}

FittedModel FittedModel::constant(double value, Eigen::Index feature_count, std::optional<double> probability_clip) {
  if (!std::isfinite(value)) fail(ErrorKind::numeric, "constant model with non-finite value");
  return FittedModel(std::make_shared<ConstantPredictor>(value), feature_count, probability_clip);
}

FittedModel FittedModel::from_function(BatchFunction fn, Eigen::Index feature_count,
                                       std::optional<double> probability_clip) {
  return FittedModel(std::make_shared<FunctionPredictor>(std::move(fn)), feature_count, probability_clip);
}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != feature_count_)
    fail(ErrorKind::contract, "model expects " + std::to_string(feature_count_) + " feature columns, got " +
                                  std::to_string(X.cols()));
  Eigen::VectorXd out = impl_->predict(X);
  if (out.size() != X.rows()) fail(ErrorKind::contract, "predictor returned the wrong number of rows");
  if (!out.allFinite()) fail(ErrorKind::numeric, "model produced a non-finite prediction");
  if (clip_) out = out.cwiseMax(*clip_).cwiseMin(1.0 - *clip_);
  return out;
}

std::vector<Eigen::Index> canonical_row_order(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(features.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      if (features(a, j) < features(b, j)) return true;
      if (features(b, j) < features(a, j)) return false;
    }
    return targets[a] < targets[b];
  });
  return order;
}

namespace {

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;  // 0 for constant columns

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const double n = static_cast<double>(X.rows());
    s.mean = X.colwise().sum() / n;
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - s.mean[j]).square().sum() / n;
      const double sd = std::sqrt(var);
      s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? 1.0 / sd : 0.0;
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean).array().rowwise() * scale.array();
  }
};

void reorder(const std::vector<Eigen::Index>& order, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
             Eigen::MatrixXd& Xo, Eigen::VectorXd& yo) {
  const auto n = static_cast<Eigen::Index>(order.size());
  Xo.resize(n, X.cols());
  yo.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    Xo.row(r) = X.row(order[static_cast<std::size_t>(r)]);
    yo[r] = y[order[static_cast<std::size_t>(r)]];
  }
}

// ----- k nearest neighbours -------------------------------------------------

class KnnPredictor final : public detail::Predictor {
 public:
  KnnPredictor(int k, Standardizer standardizer, Eigen::MatrixXd train, Eigen::VectorXd targets)
      : k_(k), standardizer_(std::move(standardizer)), train_(std::move(train)), targets_(std::move(targets)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    const Eigen::MatrixXd Z = standardizer_.apply(X);
    const auto n = train_.rows();
    Eigen::VectorXd out(X.rows());
    std::vector<std::pair<double, double>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < Z.rows(); ++r) {
      for (Eigen::Index i = 0; i < n; ++i)
        dist[static_cast<std::size_t>(i)] = {(train_.row(i) - Z.row(r)).squaredNorm(), targets_[i]};
      const auto kth = dist.begin() + k_;
      std::nth_element(dist.begin(), kth - 1, dist.end());
      std::sort(dist.begin(), kth);
      double sum = 0.0;
      for (auto it = dist.begin(); it != kth; ++it) sum += it->second;
      out[r] = sum / k_;
    }
    return out;
  }

 private:
  int k_;
  Standardizer standardizer_;
  Eigen::MatrixXd train_;
  Eigen::VectorXd targets_;
};

std::shared_ptr<const detail::Predictor> fit_knn(const KnnSpec& spec, const Eigen::MatrixXd& X,
                                                 const Eigen::VectorXd& y) {
  if (spec.k > X.rows())
    fail(ErrorKind::config, "knn: k = " + std::to_string(spec.k) + " exceeds the " + std::to_string(X.rows()) +
                                " training rows");
  auto standardizer = Standardizer::fit(X);
  Eigen::MatrixXd Z = standardizer.apply(X);
  return std::make_shared<KnnPredictor>(spec.k, std::move(standardizer), std::move(Z), y);
}

// ----- polynomial ridge -----------------------------------------------------

using Exponents = std::vector<std::vector<int>>;

void enumerate_monomials(int q, int degree, int var, int remaining, std::vector<int>& current, Exponents& out) {
  if (var == q) {
    int total = std::accumulate(current.begin(), current.end(), 0);
    if (total > 0) out.push_back(current);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    current[static_cast<std::size_t>(var)] = e;
    enumerate_monomials(q, degree, var + 1, remaining - e, current, out);
  }
  current[static_cast<std::size_t>(var)] = 0;
}

Exponents basis_exponents(int q, int degree, bool interactions) {
  Exponents out;
  if (interactions) {
    std::vector<int> current(static_cast<std::size_t>(q), 0);
    enumerate_monomials(q, degree, 0, degree, current, out);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return std::accumulate(a.begin(), a.end(), 0) < std::accumulate(b.begin(), b.end(), 0);
    });
  } else {
    for (int d = 1; d <= degree; ++d)
      for (int j = 0; j < q; ++j) {
        std::vector<int> e(static_cast<std::size_t>(q), 0);
        e[static_cast<std::size_t>(j)] = d;
        out.push_back(std::move(e));
      }
  }
  return out;
}

class PolynomialBasis {
 public:
  PolynomialBasis(const Eigen::MatrixXd& X, int degree, bool interactions)
      : raw_(Standardizer::fit(X)), exponents_(basis_exponents(static_cast<int>(X.cols()), degree, interactions)) {
    basis_ = Standardizer::fit(expand(raw_.apply(X)));
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const { return basis_.apply(expand(raw_.apply(X))); }

  Eigen::Index size() const { return static_cast<Eigen::Index>(exponents_.size()); }

 private:
  Eigen::MatrixXd expand(const Eigen::MatrixXd& Z) const {
    Eigen::MatrixXd B = Eigen::MatrixXd::Ones(Z.rows(), size());
    for (Eigen::Index c = 0; c < size(); ++c) {
      const auto& e = exponents_[static_cast<std::size_t>(c)];
      for (Eigen::Index j = 0; j < Z.cols(); ++j)
        for (int k = 0; k < e[static_cast<std::size_t>(j)]; ++k) B.col(c).array() *= Z.col(j).array();
    }
    return B;
  }

  Standardizer raw_;
  Exponents exponents_;
  Standardizer basis_;
};

class LinearBasisPredictor final : public detail::Predictor {
 public:
  LinearBasisPredictor(PolynomialBasis basis, double intercept, Eigen::VectorXd beta, bool logistic)
      : basis_(std::move(basis)), intercept_(intercept), beta_(std::move(beta)), logistic_(logistic) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd eta = (basis_.transform(X) * beta_).array() + intercept_;
    if (!logistic_) return eta;
    return eta.unaryExpr([](double t) {
      return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    });
  }

 private:
  PolynomialBasis basis_;
  double intercept_;
  Eigen::VectorXd beta_;
  bool logistic_;
};

std::shared_ptr<const detail::Predictor> fit_ridge(const RidgeBasisSpec& spec, const Eigen::MatrixXd& X,
                                                   const Eigen::VectorXd& y) {
  PolynomialBasis basis(X, spec.degree, spec.include_interactions);
  const Eigen::MatrixXd B = basis.transform(X);
  const double n = static_cast<double>(X.rows());
  const double intercept = y.mean();
  const Eigen::VectorXd yc = y.array() - intercept;
  Eigen::VectorXd beta;
  if (spec.penalty > 0) {
    Eigen::MatrixXd gram = B.transpose() * B;
    gram.diagonal().array() += n * spec.penalty;
    beta = gram.ldlt().solve(B.transpose() * yc);
  } else {
    beta = B.completeOrthogonalDecomposition().solve(yc);
  }
  if (!beta.allFinite()) fail(ErrorKind::numeric, "ridge_basis: solve produced non-finite coefficients");
  return std::make_shared<LinearBasisPredictor>(std::move(basis), intercept, std::move(beta), false);
}

double log1p_exp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

std::shared_ptr<const detail::Predictor> fit_logistic_ridge(const RidgeBasisSpec& spec, const Eigen::MatrixXd& X,
                                                            const Eigen::VectorXd& y) {
  PolynomialBasis basis(X, spec.degree, spec.include_interactions);
  const Eigen::MatrixXd B = basis.transform(X);
  const auto n = B.rows();
  const auto m = B.cols();
  // Separable data has no finite unpenalized solution; keep a tiny floor.
  const double lambda = static_cast<double>(n) * std::max(spec.penalty, 1e-6);

  Eigen::MatrixXd D(n, m + 1);
  D.col(0).setOnes();
  D.rightCols(m) = B;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m + 1);
  const double ybar = std::clamp(y.mean(), 1e-6, 1 - 1e-6);
  theta[0] = std::log(ybar / (1 - ybar));

  auto objective = [&](const Eigen::VectorXd& t) {
    const Eigen::VectorXd eta = D * t;
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v += log1p_exp(eta[i]) - y[i] * eta[i];
    return v + 0.5 * lambda * t.tail(m).squaredNorm();
  };

  double current = objective(theta);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = D * theta;
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      w[i] = std::max(prob[i] * (1 - prob[i]), 1e-12);
    }
    Eigen::VectorXd grad = D.transpose() * (prob - y);
    grad.tail(m) += lambda * theta.tail(m);
    Eigen::MatrixXd hess = D.transpose() * w.asDiagonal() * D;
    hess.diagonal().tail(m).array() += lambda;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) fail(ErrorKind::numeric, "ridge_basis (logistic): Newton step is non-finite");

    double t = 1.0;
    Eigen::VectorXd next = theta - step;
    double value = objective(next);
    while (value > current && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      value = objective(next);
    }
    if (value > current) break;
    const double change = (next - theta).lpNorm<Eigen::Infinity>();
    theta = next;
    const double improvement = current - value;
    current = value;
    if (change < 1e-10 || improvement <= 1e-14 * std::max(1.0, std::abs(current))) break;
  }
  return std::make_shared<LinearBasisPredictor>(std::move(basis), theta[0], theta.tail(m), true);
}

std::shared_ptr<const detail::Predictor> dispatch(const LearnerSpec& spec, const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& y, bool probability, std::uint64_t seed) {
  return std::visit(overloaded{
                        [&](const KnnSpec& s) { return fit_knn(s, X, y); },
                        [&](const RidgeBasisSpec& s) {
                          Eigen::MatrixXd Xo;
                          Eigen::VectorXd yo;
                          reorder(canonical_row_order(X, y), X, y, Xo, yo);
                          return probability ? fit_logistic_ridge(s, Xo, yo) : fit_ridge(s, Xo, yo);
                        },
                        [&](const BoostedTreesSpec& s) {
                          Eigen::MatrixXd Xo;
                          Eigen::VectorXd yo;
                          reorder(canonical_row_order(X, y), X, y, Xo, yo);
                          return detail::fit_boosted_trees(s, Xo, yo, probability, seed);
                        },
                        [&](const ConstantSpec&) -> std::shared_ptr<const detail::Predictor> {
                          return std::make_shared<ConstantPredictor>(y.mean());
                        },
                    },
                    spec);
}

void check_training_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) fail(ErrorKind::contract, "features and targets disagree on the number of rows");
  if (X.rows() < 1) fail(ErrorKind::config, "cannot fit a learner on zero rows");
  if (!X.allFinite() || !y.allFinite()) fail(ErrorKind::numeric, "non-finite training data");
}

}  // namespace

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                std::uint64_t seed) {
  validate(spec);
  check_training_data(features, targets);
  if (features.cols() == 0) return FittedModel::constant(targets.mean(), 0);
  return FittedModel(dispatch(spec, features, targets, false, seed), features.cols());
}

FittedModel fit_probability(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                            const Eigen::VectorXd& binary_targets, double clip, std::uint64_t seed) {
  validate(spec);
  check_training_data(features, binary_targets);
  if (!(clip > 0.0 && clip < 0.5)) fail(ErrorKind::config, "probability clip must lie in (0, 0.5)");
  Eigen::Index ones = 0;
  for (double t : binary_targets) {
    if (t != 0.0 && t != 1.0) fail(ErrorKind::validation, "probability targets must be 0 or 1");
    ones += t == 1.0;
  }
  const bool constant = std::holds_alternative<ConstantSpec>(spec) || features.cols() == 0;
  if (constant) return FittedModel::constant(binary_targets.mean(), features.cols(), clip);
  if (ones == 0 || ones == binary_targets.size())
    fail(ErrorKind::estimation, "probability fit needs both classes in the training data");
  return FittedModel(dispatch(spec, features, binary_targets, true, seed), features.cols(), clip);
}

}  // namespace tevim
