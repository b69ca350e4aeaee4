#pragma once

#include <Eigen/Dense>

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tevim {

enum class TreatmentMode { binary, continuous };

std::string to_string(TreatmentMode mode);
TreatmentMode parse_treatment_mode(const std::string& text);

/// Observations (Y, A, X) with covariate names. Validated on construction
/// and immutable afterwards.
class Dataset {
 public:
  Dataset(Eigen::VectorXd outcome, Eigen::VectorXd treatment, Eigen::MatrixXd covariates,
          std::vector<std::string> covariate_names, TreatmentMode mode = TreatmentMode::binary);

  Eigen::Index n() const noexcept { return outcome_.size(); }
  Eigen::Index p() const noexcept { return covariates_.cols(); }

  const Eigen::VectorXd& outcome() const noexcept { return outcome_; }
  const Eigen::VectorXd& treatment() const noexcept { return treatment_; }
  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }
  TreatmentMode mode() const noexcept { return mode_; }

  /// Rows in the given order. The result must itself satisfy the dataset
  /// invariants (in binary mode both arms must be present).
  Dataset rows(std::span<const Eigen::Index> index) const;

  /// 0-based position of a named covariate; schema error if absent.
  Eigen::Index covariate_position(const std::string& name) const;

  friend bool operator==(const Dataset&, const Dataset&);

 private:
  Eigen::VectorXd outcome_;
  Eigen::VectorXd treatment_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> names_;
  TreatmentMode mode_;
};

/// A set s of covariate indices, 1-based, sorted and distinct, relative to
/// p covariates. The full set {1..p} plays the role of "all covariates".
class CovariateSubset {
 public:
  CovariateSubset(std::vector<int> indices, int p);

  static CovariateSubset full(int p);
  static CovariateSubset empty(int p);

  const std::vector<int>& indices() const noexcept { return indices_; }
  int p() const noexcept { return p_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool is_full() const noexcept { return static_cast<int>(indices_.size()) == p_; }
  bool is_empty() const noexcept { return indices_.empty(); }
  bool contains(int index) const;
  bool is_subset_of(const CovariateSubset& other) const;

  /// {1..p} \ s, 1-based.
  std::vector<int> complement() const;

  /// "{1,3}"
  std::string to_string() const;

  auto operator<=>(const CovariateSubset&) const = default;

 private:
  std::vector<int> indices_;
  int p_;
};

/// X_{-s}: the columns of X whose 1-based index is not in s, order kept.
Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& X, const CovariateSubset& s);

Dataset load_csv(const std::filesystem::path& path, const std::string& outcome_col,
                 const std::string& treatment_col, const std::vector<std::string>& covariate_cols,
                 TreatmentMode mode = TreatmentMode::binary);

/// Column names from the header row of a CSV file.
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

Dataset parse_csv(std::istream& in, const std::string& outcome_col, const std::string& treatment_col,
                  const std::vector<std::string>& covariate_cols, TreatmentMode mode = TreatmentMode::binary,
                  const std::string& source_name = "<stream>");

/// Writes columns (outcome_col, treatment_col, covariates...) with shortest
/// round-trip decimal formatting.
void write_csv(std::ostream& out, const Dataset& data, const std::string& outcome_col = "y",
               const std::string& treatment_col = "a");
void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& outcome_col = "y",
               const std::string& treatment_col = "a");

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace tevim
