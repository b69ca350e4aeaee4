#include "tevim/crossfit.hpp"
#include "tevim/error.hpp"
#include "tevim/simulation.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace tevim;

namespace {

std::span<const double> arms(const Eigen::VectorXd& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

Eigen::VectorXd alternating(Eigen::Index n) {
  Eigen::VectorXd a(n);
  for (Eigen::Index i = 0; i < n; ++i) a[i] = static_cast<double>(i % 2);
  return a;
}

const testing::LinearDesign kDesign{
    [](const Eigen::RowVectorXd& x) { return x[0] - 0.5 * x[1]; },
    [](const Eigen::RowVectorXd& x) { return 1 + x[0] * x[1] + x[1]; },
    [](const Eigen::RowVectorXd& x) { return expit(0.5 * x[0] - 0.3 * x[1]); },
};

AlgorithmConfig config(const std::string& label, LearnerSpec spec, int p = 2) {
  AlgorithmConfig cfg;
  cfg.algorithm = Algorithm::parse(label);
  cfg.folds = 2;
  cfg.outcome = spec;
  cfg.propensity = spec;
  cfg.cate = spec;
  cfg.subset = spec;
  for (int j = 1; j <= p; ++j) cfg.subsets.emplace_back(std::vector<int>{j}, p);
  return cfg;
}

void check_equal(const PerObservationEstimates& a, const PerObservationEstimates& b, double tol) {
  REQUIRE(a.phi.size() == b.phi.size());
  CHECK((a.phi - b.phi).cwiseAbs().maxCoeff() <= tol);
  CHECK((a.tau - b.tau).cwiseAbs().maxCoeff() <= tol);
  CHECK((a.tau_p - b.tau_p).cwiseAbs().maxCoeff() <= tol);
  REQUIRE(a.tau_s.size() == b.tau_s.size());
  for (std::size_t k = 0; k < a.tau_s.size(); ++k) CHECK((a.tau_s[k] - b.tau_s[k]).cwiseAbs().maxCoeff() <= tol);
}

}  // namespace

TEST_CASE("n=10, K=5 with balanced arms gives folds of two") {
  const auto a = alternating(10);
  const auto f = make_folds(10, 5, arms(a), 3);
  for (int k = 1; k <= 5; ++k) CHECK(f.members(k).size() == 2);
  CHECK(make_folds(10, 5, arms(a), 3).fold_of == f.fold_of);
}

TEST_CASE("n=1000 balanced, K=5: 100 treated and 100 control per fold") {
  const auto a = alternating(1000);
  const auto f = make_folds(1000, 5, arms(a), 8);
  for (int k = 1; k <= 5; ++k) {
    int treated = 0, control = 0;
    for (auto i : f.members(k)) (a[i] == 1.0 ? treated : control)++;
    CHECK(treated == 100);
    CHECK(control == 100);
  }
}

TEST_CASE("fold construction properties over random arms") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 9);
    const Eigen::Index n = 2 * K + static_cast<Eigen::Index>(rng() % 300);
    Eigen::VectorXd a(n);
    for (Eigen::Index i = 0; i < n; ++i) a[i] = i < K ? 0.0 : (i < 2 * K ? 1.0 : static_cast<double>(rng() % 2));
    const auto f = make_folds(n, K, arms(a), rng());
    CHECK(f.n() == n);
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<int> sizes(static_cast<std::size_t>(K), 0);
      for (Eigen::Index i = 0; i < n; ++i)
        if (a[i] == arm) sizes[static_cast<std::size_t>(f.fold_of[static_cast<std::size_t>(i)] - 1)]++;
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
      CHECK(*lo >= 1);
    }
  }
}

TEST_CASE("unstratified folds and fold errors") {
  const auto f = make_folds(11, 3, {}, 1);
  for (int k = 1; k <= 3; ++k) CHECK(f.members(k).size() >= 3);
  CHECK(f.members(1).size() + f.complement(1).size() == 11);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(20);
  a.head(3).setOnes();
  try {
    make_folds(20, 5, arms(a), 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("smaller K") != std::string::npos);
  }
  CHECK_THROWS_AS(make_folds(3, 5, {}, 1), Error);
  CHECK_THROWS_AS(make_folds(10, 1, {}, 1), Error);
}

TEST_CASE("algorithm labels") {
  for (const char* label : {"1A", "1B", "2A", "2B"}) CHECK(Algorithm::parse(label).label() == label);
  CHECK(Algorithm::parse("1A").splitting == SampleSplitting::none);
  CHECK(Algorithm::parse("2B").variant == CateVariant::dr_learner);
  CHECK_THROWS_AS(Algorithm::parse("3A"), Error);
}

TEST_CASE("variant A with constant learners: tau is the training-fold mean difference") {
  const auto d = testing::draw(kDesign, 120, 2, 1);
  auto cfg = config("2A", ConstantSpec{});
  cfg.folds = 4;
  const auto folds = default_folds(d, cfg);
  const auto est = run_algorithm(d, cfg, folds);
  for (int k = 1; k <= 4; ++k) {
    double s1 = 0, s0 = 0, n1 = 0, n0 = 0;
    for (auto i : folds.complement(k)) {
      if (d.treatment()[i] == 1.0) {
        s1 += d.outcome()[i];
        ++n1;
      } else {
        s0 += d.outcome()[i];
        ++n0;
      }
    }
    for (auto i : folds.members(k)) CHECK(est.tau[i] == doctest::Approx(s1 / n1 - s0 / n0).epsilon(1e-13));
  }
}

TEST_CASE("algorithm 1 equals algorithm 2 on data duplicated across two folds") {
  const auto d = testing::draw(kDesign, 150, 2, 2);
  const auto dup = testing::duplicate(d);
  FoldAssignment halves{2, std::vector<int>(static_cast<std::size_t>(dup.n()), 1)};
  for (Eigen::Index i = d.n(); i < dup.n(); ++i) halves.fold_of[static_cast<std::size_t>(i)] = 2;

  for (const LearnerSpec& spec : {LearnerSpec{RidgeBasisSpec{}}, LearnerSpec{RidgeBasisSpec{2, false, 0.0}},
                                  LearnerSpec{KnnSpec{1}}}) {
    for (const char variant : {'A', 'B'}) {
      CAPTURE(learner_kind(spec));
      CAPTURE(variant);
      const auto one = run_algorithm(dup, config(std::string("1") + variant, spec));
      const auto two = run_algorithm(dup, config(std::string("2") + variant, spec), halves);
      check_equal(one, two, 1e-8);
      // Both also match algorithm 1 on a single copy.
      const auto single = run_algorithm(d, config(std::string("1") + variant, spec));
      CHECK((two.phi.head(d.n()) - single.phi).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((two.tau_p.tail(d.n()) - single.tau_p).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("out-of-fold purity: each fold is reproduced by its own stage models") {
  const auto d = testing::draw(kDesign, 200, 2, 3);
  auto cfg = config("2B", BoostedTreesSpec{20, 2, 0.2, 5, 0.7});
  cfg.folds = 4;
  const auto folds = default_folds(d, cfg);
  const auto est = run_algorithm(d, cfg);
  for (int k = 1; k <= 4; ++k) {
    const auto train = folds.complement(k);
    const auto test = folds.members(k);
    const auto part = fit_stage(d.rows(train), cfg, stage_seed(cfg, k)).evaluate(d.rows(test));
    for (std::size_t r = 0; r < test.size(); ++r) {
      const auto i = test[r];
      const auto j = static_cast<Eigen::Index>(r);
      CHECK(est.phi[i] == part.phi[j]);
      CHECK(est.tau[i] == part.tau[j]);
      CHECK(est.tau_p[i] == part.tau_p[j]);
      for (std::size_t s = 0; s < est.tau_s.size(); ++s) CHECK(est.tau_s[s][i] == part.tau_s[s][j]);
    }
  }
}

TEST_CASE("permuting rows and folds together permutes the outputs") {
  const auto d = testing::draw(kDesign, 160, 2, 4);
  for (const LearnerSpec& spec : {LearnerSpec{RidgeBasisSpec{}}, LearnerSpec{BoostedTreesSpec{15, 2, 0.2, 5, 1.0}}}) {
    auto cfg = config("2B", spec);
    cfg.folds = 3;
    const auto folds = default_folds(d, cfg);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(d.n()));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(9);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto pd = d.rows(perm);
    FoldAssignment pf{3, {}};
    for (auto i : perm) pf.fold_of.push_back(folds.fold_of[static_cast<std::size_t>(i)]);
    const auto base = run_algorithm(d, cfg, folds);
    const auto moved = run_algorithm(pd, cfg, pf);
    for (std::size_t r = 0; r < perm.size(); ++r) {
      const auto i = perm[r];
      const auto j = static_cast<Eigen::Index>(r);
      CHECK(moved.phi[j] == base.phi[i]);
      CHECK(moved.tau[j] == base.tau[i]);
      CHECK(moved.tau_s[0][j] == base.tau_s[0][i]);
    }
  }
}

TEST_CASE("results do not depend on the thread count") {
  const auto d = testing::draw(kDesign, 300, 2, 5);
  auto cfg = config("2B", BoostedTreesSpec{20, 3, 0.1, 5, 0.8});
  cfg.folds = 5;
  cfg.threads = 1;
  const auto serial = run_algorithm(d, cfg);
  cfg.threads = 4;
  const auto parallel = run_algorithm(d, cfg);
  check_equal(serial, parallel, 0.0);
  cfg.threads = 1;
  check_equal(serial, run_algorithm(d, cfg), 0.0);
}

TEST_CASE("subsets share phi and tau; the full set reproduces tau_p") {
  const auto d = testing::draw(kDesign, 200, 2, 6);
  auto cfg = config("2B", RidgeBasisSpec{});
  cfg.subsets.push_back(CovariateSubset::full(2));
  const auto est = run_algorithm(d, cfg);
  CHECK(est.tau_for(CovariateSubset::full(2)) == est.tau_p);
  auto fewer = cfg;
  fewer.subsets = {CovariateSubset({1}, 2)};
  const auto small = run_algorithm(d, fewer);
  CHECK(small.phi == est.phi);
  CHECK(small.tau == est.tau);
  CHECK(small.tau_for(CovariateSubset({1}, 2)) == est.tau_for(CovariateSubset({1}, 2)));
  CHECK_THROWS_AS(small.tau_for(CovariateSubset({2}, 2)), Error);
}

TEST_CASE("configuration errors") {
  const auto d = testing::draw(kDesign, 60, 2, 7);
  auto cfg = config("2B", RidgeBasisSpec{});
  cfg.subsets.push_back(CovariateSubset({1}, 2));
  CHECK_THROWS_AS(validate(cfg, d), Error);
  cfg = config("2B", RidgeBasisSpec{}, 3);
  CHECK_THROWS_AS(validate(cfg, d), Error);
  cfg = config("2B", RidgeBasisSpec{});
  cfg.clip = 0.5;
  CHECK_THROWS_AS(validate(cfg, d), Error);
  cfg = config("2B", RidgeBasisSpec{});
  cfg.propensity = KnownConstant{1.0};
  CHECK_THROWS_AS(validate(cfg, d), Error);
}

TEST_CASE("fit errors are annotated with the fold") {
  const auto d = testing::draw(kDesign, 40, 2, 8);
  auto cfg = config("2B", KnnSpec{25});
  cfg.folds = 2;
  try {
    run_algorithm(d, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("fold ") == 0);
  }
}

TEST_CASE("algorithm 2B on the simulation model lands near the true importance") {
  const auto s = generate_dgp(2000, 31);
  auto cfg = config("2B", default_flexible_learner());
  cfg.folds = 5;
  const auto est = run_algorithm(s.data, cfg);
  const auto& t1 = est.tau_for(CovariateSubset({1}, 2));
  const double theta1 = ((est.phi - t1).array().square() - (est.phi - est.tau).array().square()).mean();
  const double thetap = ((est.phi - est.tau_p).array().square() - (est.phi - est.tau).array().square()).mean();
  CHECK(std::abs(theta1 / thetap - true_values().psi1) < 0.1);
}
