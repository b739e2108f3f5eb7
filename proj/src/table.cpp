#include "mgids/table.hpp"

#include <algorithm>
#include <cmath>

#include "mgids/errors.hpp"

namespace mgids::data {

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (int b = 1; b <= kNumBus; ++b) out.push_back("V" + std::to_string(b));
    for (int b = 1; b <= kNumBus; ++b) out.push_back("I" + std::to_string(b));
    for (int i = 1; i <= kNumDG; ++i) {
      out.push_back("P_DG" + std::to_string(i));
      out.push_back("Q_DG" + std::to_string(i));
      out.push_back("f_DG" + std::to_string(i));
    }
    return out;
  }();
  return names;
}

const std::vector<std::string>& unlabeled_header() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out{"time"};
    const auto& f = feature_names();
    out.insert(out.end(), f.begin(), f.end());
    return out;
  }();
  return names;
}

const std::vector<std::string>& labeled_header() {
  static const std::vector<std::string> names = [] {
    auto out = unlabeled_header();
    out.push_back("label_bin");
    out.push_back("label_multi");
    return out;
  }();
  return names;
}

SampleTable::SampleTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

std::size_t SampleTable::col(const std::string& name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw DataError("table has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns_.begin());
}

bool SampleTable::has_col(const std::string& name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

void SampleTable::append_row(std::span<const double> values) {
  if (values.size() != n_cols()) {
    throw DataError("row width " + std::to_string(values.size()) + " does not match " +
                    std::to_string(n_cols()) + " columns");
  }
  values_.insert(values_.end(), values.begin(), values.end());
}

std::vector<double> SampleTable::column(std::size_t c) const {
  std::vector<double> out(n_rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = at(r, c);
  return out;
}

SampleTable SampleTable::select_rows(std::span<const std::size_t> rows) const {
  SampleTable out(columns_);
  out.values_.reserve(rows.size() * n_cols());
  for (std::size_t r : rows) out.append_row(row(r));
  return out;
}

SampleTable SampleTable::select_columns(const std::vector<std::string>& names) const {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) idx.push_back(col(n));
  SampleTable out(names);
  out.values_.resize(n_rows() * names.size());
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (std::size_t k = 0; k < idx.size(); ++k) out.at(r, k) = at(r, idx[k]);
  }
  return out;
}

LabeledData to_labeled_data(const SampleTable& table) {
  LabeledData d;
  const std::size_t bin_col = table.col("label_bin");
  const std::size_t multi_col = table.col("label_multi");
  std::vector<std::size_t> feat_cols;
  for (std::size_t c = 0; c < table.n_cols(); ++c) {
    const auto& name = table.columns()[c];
    if (name == "time" || c == bin_col || c == multi_col) continue;
    feat_cols.push_back(c);
    d.feature_names.push_back(name);
  }
  d.n_rows = table.n_rows();
  d.n_features = feat_cols.size();
  d.features.resize(d.n_rows * d.n_features);
  d.label_bin.resize(d.n_rows);
  d.label_multi.resize(d.n_rows);
  for (std::size_t r = 0; r < d.n_rows; ++r) {
    for (std::size_t k = 0; k < feat_cols.size(); ++k) {
      d.features[r * d.n_features + k] = table.at(r, feat_cols[k]);
    }
    d.label_bin[r] = static_cast<int>(std::lround(table.at(r, bin_col)));
    d.label_multi[r] = static_cast<int>(std::lround(table.at(r, multi_col)));
  }
  return d;
}

}  // namespace mgids::data
