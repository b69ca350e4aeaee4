#include "tevim/data.hpp"
#include "tevim/error.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace tevim;

namespace {

Dataset parse(const std::string& text, const std::string& a = "a", TreatmentMode mode = TreatmentMode::binary) {
  std::istringstream in(text);
  return parse_csv(in, "y", a, {"x1"}, mode);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::numeric;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("three-row file parses to n=3, p=1") {
  const auto d = parse("y,a,x1\n1.5,0,2\n2,1,3\n-1,0,4\n");
  CHECK(d.n() == 3);
  CHECK(d.p() == 1);
  CHECK(d.treatment()[1] == 1.0);
  CHECK(d.outcome()[2] == -1.0);
  CHECK(d.covariates()(0, 0) == 2.0);
  CHECK(d.covariate_names() == std::vector<std::string>{"x1"});
}

TEST_CASE("absent treatment column is a schema error naming it") {
  CHECK(kind_of([] { parse("y,a,x1\n1,0,2\n2,1,3\n", "z"); }) == ErrorKind::schema);
  CHECK(message_of([] { parse("y,a,x1\n1,0,2\n2,1,3\n", "z"); }).find("'z'") != std::string::npos);
}

TEST_CASE("binary treatment with one empty arm is a validation error") {
  CHECK(kind_of([] { parse("y,a,x1\n1,0,2\n2,0,3\n3,0,1\n"); }) == ErrorKind::validation);
  CHECK(kind_of([] { parse("y,a,x1\n1,0,2\n2,2,3\n"); }) == ErrorKind::validation);
  CHECK_NOTHROW(parse("y,a,x1\n1,0,2\n2,2.5,3\n", "a", TreatmentMode::continuous));
}

TEST_CASE("non-numeric and missing cells are parse errors with row and column") {
  const auto msg = message_of([] { parse("y,a,x1\n1,0,2\n2,1,abc\n"); });
  CHECK(kind_of([] { parse("y,a,x1\n1,0,2\n2,1,abc\n"); }) == ErrorKind::parse);
  CHECK(msg.find("row 2") != std::string::npos);
  CHECK(msg.find("x1") != std::string::npos);
  CHECK(kind_of([] { parse("y,a,x1\n1,0,\n2,1,3\n"); }) == ErrorKind::parse);
  CHECK(kind_of([] { parse("y,a,x1\n1,0\n2,1,3\n"); }) == ErrorKind::parse);
  CHECK(kind_of([] { parse("y,a,x1\n1,0,nan\n2,1,3\n"); }) == ErrorKind::parse);
}

TEST_CASE("quoted fields, CRLF, BOM and blank lines") {
  const auto d = parse("\xEF\xBB\xBFy,\"a\",x1\r\n\"1.25\",0,2\r\n\r\n2,1,\"3\"\r\n");
  CHECK(d.n() == 2);
  CHECK(d.outcome()[0] == 1.25);
  CHECK(d.covariates()(1, 0) == 3.0);
}

TEST_CASE("drop_columns examples") {
  Eigen::MatrixXd X(1, 3);
  X << 1, 2, 3;
  const auto d = drop_columns(X, CovariateSubset({2}, 3));
  REQUIRE(d.cols() == 2);
  CHECK(d(0, 0) == 1);
  CHECK(d(0, 1) == 3);

  Eigen::MatrixXd Y = Eigen::MatrixXd::Random(4, 2);
  const auto none = drop_columns(Y, CovariateSubset::full(2));
  CHECK(none.cols() == 0);
  CHECK(none.rows() == 4);
  CHECK(drop_columns(Y, CovariateSubset::empty(2)) == Y);
}

TEST_CASE("drop_columns of the empty subset composes as the identity") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, p);
    std::vector<int> idx;
    for (int j = 1; j <= p; ++j)
      if (rng() % 2) idx.push_back(j);
    const CovariateSubset s(idx, p);
    const auto once = drop_columns(X, s);
    CHECK(drop_columns(drop_columns(X, CovariateSubset::empty(p)), s) == once);
    CHECK(once.cols() == p - static_cast<Eigen::Index>(idx.size()));
    // Remaining columns keep their order.
    Eigen::Index c = 0;
    for (int j = 1; j <= p; ++j)
      if (!s.contains(j)) CHECK(once.col(c++) == X.col(j - 1));
  }
}

TEST_CASE("CovariateSubset invariants") {
  const CovariateSubset s({3, 1}, 4);
  CHECK(s.indices() == std::vector<int>{1, 3});
  CHECK(s.complement() == std::vector<int>{2, 4});
  CHECK(s.to_string() == "{1,3}");
  CHECK(s.is_subset_of(CovariateSubset::full(4)));
  CHECK_FALSE(CovariateSubset::full(4).is_subset_of(s));
  CHECK(CovariateSubset::full(4).is_full());
  CHECK(CovariateSubset::empty(4).is_empty());
  CHECK(kind_of([] { CovariateSubset({1, 1}, 2); }) == ErrorKind::config);
  CHECK(kind_of([] { CovariateSubset({0}, 2); }) == ErrorKind::config);
  CHECK(kind_of([] { CovariateSubset({3}, 2); }) == ErrorKind::config);
}

TEST_CASE("load, write, load round-trips exactly") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 3.0);
  const Eigen::Index n = 200;
  Eigen::VectorXd y(n), a(n);
  Eigen::MatrixXd X(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = z(rng);
    a[i] = static_cast<double>(i % 2);
    for (int j = 0; j < 3; ++j) X(i, j) = z(rng) * 1e-3 + (j == 2 ? 1e12 : 0.0);
  }
  const Dataset d(y, a, X, {"u", "v", "w"});
  std::ostringstream out;
  write_csv(out, d, "yy", "trt");
  std::istringstream in(out.str());
  const auto back = parse_csv(in, "yy", "trt", {"u", "v", "w"});
  CHECK(back == d);

  std::ostringstream again;
  write_csv(again, back, "yy", "trt");
  CHECK(again.str() == out.str());
}

TEST_CASE("Dataset rejects inconsistent shapes and non-finite values") {
  Eigen::VectorXd y(2), a(2);
  y << 1, 2;
  a << 0, 1;
  Eigen::MatrixXd X(2, 1);
  X << 0, 1;
  CHECK_NOTHROW(Dataset(y, a, X, {"x"}));
  CHECK(kind_of([&] { Dataset(y, a, Eigen::MatrixXd(3, 1), {"x"}); }) == ErrorKind::validation);
  CHECK(kind_of([&] { Dataset(y.head(1), a.head(1), X.topRows(1), {"x"}); }) == ErrorKind::validation);
  Eigen::VectorXd bad = y;
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK(kind_of([&] { Dataset(bad, a, X, {"x"}); }) == ErrorKind::validation);
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}
