#include "tevim/data.hpp"

#include "tevim/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace tevim {

std::string to_string(TreatmentMode mode) { return mode == TreatmentMode::binary ? "binary" : "continuous"; }

TreatmentMode parse_treatment_mode(const std::string& text) {
  if (text == "binary") return TreatmentMode::binary;
  if (text == "continuous") return TreatmentMode::continuous;
  fail(ErrorKind::config, "unknown treatment mode '" + text + "' (expected binary or continuous)");
}

Dataset::Dataset(Eigen::VectorXd outcome, Eigen::VectorXd treatment, Eigen::MatrixXd covariates,
                 std::vector<std::string> covariate_names, TreatmentMode mode)
    : outcome_(std::move(outcome)),
      treatment_(std::move(treatment)),
      covariates_(std::move(covariates)),
      names_(std::move(covariate_names)),
      mode_(mode) {
  const auto n = outcome_.size();
  if (treatment_.size() != n || covariates_.rows() != n)
    fail(ErrorKind::validation, "outcome, treatment and covariates disagree on the number of rows");
  if (n < 2) fail(ErrorKind::validation, "a dataset needs at least 2 rows");
  if (covariates_.cols() < 1) fail(ErrorKind::validation, "a dataset needs at least 1 covariate");
  if (static_cast<Eigen::Index>(names_.size()) != covariates_.cols())
    fail(ErrorKind::validation, "covariate name count does not match the covariate matrix");
  if (!outcome_.allFinite() || !treatment_.allFinite() || !covariates_.allFinite())
    fail(ErrorKind::validation, "dataset contains non-finite values");
  if (mode_ == TreatmentMode::binary) {
    Eigen::Index treated = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = treatment_[i];
      if (a != 0.0 && a != 1.0)
        fail(ErrorKind::validation, "binary treatment must be 0 or 1 (row " + std::to_string(i + 1) + " has " +
                                        format_double(a) + ")");
      treated += a == 1.0;
    }
    if (treated == 0 || treated == n)
      fail(ErrorKind::validation, "binary treatment must contain both arms (one arm is empty)");
  }
}

Dataset Dataset::rows(std::span<const Eigen::Index> index) const {
  const auto m = static_cast<Eigen::Index>(index.size());
  Eigen::VectorXd y(m), a(m);
  Eigen::MatrixXd x(m, p());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = index[static_cast<std::size_t>(r)];
    if (i < 0 || i >= n()) fail(ErrorKind::contract, "row index out of range");
    y[r] = outcome_[i];
    a[r] = treatment_[i];
    x.row(r) = covariates_.row(i);
  }
  return Dataset(std::move(y), std::move(a), std::move(x), names_, mode_);
}

Eigen::Index Dataset::covariate_position(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) fail(ErrorKind::schema, "unknown covariate '" + name + "'");
  return static_cast<Eigen::Index>(it - names_.begin());
}

bool operator==(const Dataset& lhs, const Dataset& rhs) {
  return lhs.mode_ == rhs.mode_ && lhs.names_ == rhs.names_ && lhs.outcome_.size() == rhs.outcome_.size() &&
         lhs.covariates_.cols() == rhs.covariates_.cols() && lhs.outcome_ == rhs.outcome_ &&
         lhs.treatment_ == rhs.treatment_ && lhs.covariates_ == rhs.covariates_;
}

CovariateSubset::CovariateSubset(std::vector<int> indices, int p) : indices_(std::move(indices)), p_(p) {
  if (p_ < 1) fail(ErrorKind::config, "covariate subset needs p >= 1");
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
    fail(ErrorKind::config, "covariate subset has repeated indices");
  for (int i : indices_)
    if (i < 1 || i > p_)
      fail(ErrorKind::config, "covariate index " + std::to_string(i) + " outside [1," + std::to_string(p_) + "]");
}

CovariateSubset CovariateSubset::full(int p) {
  std::vector<int> all(static_cast<std::size_t>(std::max(p, 0)));
  for (int j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j + 1;
  return CovariateSubset(std::move(all), p);
}

CovariateSubset CovariateSubset::empty(int p) { return CovariateSubset({}, p); }

bool CovariateSubset::contains(int index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

bool CovariateSubset::is_subset_of(const CovariateSubset& other) const {
  return p_ == other.p_ && std::includes(other.indices_.begin(), other.indices_.end(), indices_.begin(), indices_.end());
}

std::vector<int> CovariateSubset::complement() const {
  std::vector<int> rest;
  for (int j = 1; j <= p_; ++j)
    if (!contains(j)) rest.push_back(j);
  return rest;
}

std::string CovariateSubset::to_string() const {
  std::string s = "{";
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(indices_[k]);
  }
  return s + "}";
}

Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& X, const CovariateSubset& s) {
  if (X.cols() != s.p()) fail(ErrorKind::contract, "subset was built for a different covariate count");
  const auto keep = s.complement();
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = X.col(keep[c] - 1);
  return out;
}

namespace {

// One RFC-4180 record. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (;;) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      if (quoted) fail(ErrorKind::parse, "unterminated quoted field at line " + std::to_string(line));
      break;
    }
    any = true;
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (ch == '\n') {
      break;
    } else {
      field += ch;
    }
  }
  ++line;
  fields.push_back(std::move(field));
  return any;
}

double parse_cell(std::string_view text, std::size_t row, const std::string& column) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
    fail(ErrorKind::parse, "row " + std::to_string(row) + ", column '" + column + "': cannot parse '" +
                               std::string(text) + "' as a finite number");
  return value;
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& outcome_col, const std::string& treatment_col,
                  const std::vector<std::string>& covariate_cols, TreatmentMode mode,
                  const std::string& source_name) {
  std::vector<std::string> header;
  std::size_t line = 1;
  if (!read_record(in, header, line)) fail(ErrorKind::schema, source_name + ": missing header row");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) position.emplace(header[c], c);
  auto column = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) fail(ErrorKind::schema, source_name + ": missing column '" + name + "'");
    return it->second;
  };
  if (covariate_cols.empty()) fail(ErrorKind::schema, "at least one covariate column is required");
  const auto y_col = column(outcome_col);
  const auto a_col = column(treatment_col);
  std::vector<std::size_t> x_cols;
  for (const auto& name : covariate_cols) x_cols.push_back(column(name));

  std::vector<double> y, a, x;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (read_record(in, fields, line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++row;
    if (fields.size() != header.size())
      fail(ErrorKind::parse, source_name + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                 " fields, header has " + std::to_string(header.size()));
    y.push_back(parse_cell(fields[y_col], row, outcome_col));
    a.push_back(parse_cell(fields[a_col], row, treatment_col));
    for (std::size_t k = 0; k < x_cols.size(); ++k) x.push_back(parse_cell(fields[x_cols[k]], row, covariate_cols[k]));
  }

  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  Eigen::MatrixXd X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x.data(), n, p);
  return Dataset(Eigen::Map<Eigen::VectorXd>(y.data(), n), Eigen::Map<Eigen::VectorXd>(a.data(), n), std::move(X),
                 covariate_cols, mode);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& outcome_col, const std::string& treatment_col,
                 const std::vector<std::string>& covariate_cols, TreatmentMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::schema, "cannot open '" + path.string() + "'");
  return parse_csv(in, outcome_col, treatment_col, covariate_cols, mode, path.string());
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::schema, "cannot open '" + path.string() + "'");
  std::vector<std::string> header;
  std::size_t line = 1;
  if (!read_record(in, header, line)) fail(ErrorKind::schema, path.string() + ": missing header row");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  return header;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data, const std::string& outcome_col, const std::string& treatment_col) {
  out << quote_if_needed(outcome_col) << ',' << quote_if_needed(treatment_col);
  for (const auto& name : data.covariate_names()) out << ',' << quote_if_needed(name);
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << format_double(data.outcome()[i]) << ',' << format_double(data.treatment()[i]);
    for (Eigen::Index j = 0; j < data.p(); ++j) out << ',' << format_double(data.covariates()(i, j));
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& outcome_col,
               const std::string& treatment_col) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::schema, "cannot write '" + path.string() + "'");
  write_csv(out, data, outcome_col, treatment_col);
}

}  // namespace tevim
