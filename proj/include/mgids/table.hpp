#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mgids::data {

inline constexpr int kNumDG = 10;
inline constexpr int kNumBus = 3;
inline constexpr int kNumFeatures = 2 * kNumBus + 3 * kNumDG;  // 36

/// The 36 measurement columns in CSV order: V1..V3, I1..I3, then P/Q/f per DG.
const std::vector<std::string>& feature_names();

/// time, the 36 features, label_bin, label_multi.
const std::vector<std::string>& labeled_header();

/// time and the 36 features (a freshly simulated table before labeling).
const std::vector<std::string>& unlabeled_header();

/// Column-ordered numeric table; the in-memory form of a scenario or dataset CSV.
class SampleTable {
 public:
  SampleTable() = default;
  explicit SampleTable(std::vector<std::string> columns);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t n_rows() const { return n_cols() == 0 ? 0 : values_.size() / n_cols(); }
  std::size_t n_cols() const { return columns_.size(); }
  bool empty() const { return values_.empty(); }

  /// Index of a named column; throws DataError when absent.
  std::size_t col(const std::string& name) const;
  bool has_col(const std::string& name) const;

  double at(std::size_t row, std::size_t c) const { return values_[row * n_cols() + c]; }
  double& at(std::size_t row, std::size_t c) { return values_[row * n_cols() + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * n_cols(), n_cols()};
  }
  std::span<double> row(std::size_t r) { return {values_.data() + r * n_cols(), n_cols()}; }

  void append_row(std::span<const double> values);
  void reserve_rows(std::size_t n) { values_.reserve(n * n_cols()); }

  /// Copy of one column.
  std::vector<double> column(std::size_t c) const;

  const std::vector<double>& raw() const { return values_; }
  std::vector<double>& raw() { return values_; }

  /// New table holding the given rows, in the given order.
  SampleTable select_rows(std::span<const std::size_t> rows) const;

  /// New table holding the named columns, in the given order.
  SampleTable select_columns(const std::vector<std::string>& names) const;

  friend bool operator==(const SampleTable&, const SampleTable&) = default;

 private:
  std::vector<std::string> columns_;
  std::vector<double> values_;
};

/// Feature matrix and labels pulled out of a labeled table.
struct LabeledData {
  std::vector<std::string> feature_names;
  std::vector<double> features;  // row-major, n_rows x n_features
  std::vector<int> label_bin;
  std::vector<int> label_multi;
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
};

/// Extracts every column except time and the labels as features.
LabeledData to_labeled_data(const SampleTable& table);

}  // namespace mgids::data
