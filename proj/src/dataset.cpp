#include "mgids/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mgids/csv.hpp"
#include "mgids/errors.hpp"
#include "mgids/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgids::data {

bool at_or_after_onset(double t, double onset) {
  return t >= onset - 1e-9 * std::max(1.0, std::abs(onset));
}

SampleTable label_scenario(const SampleTable& table, const attack::AttackSpec& attack) {
  if (table.has_col("label_bin") || table.has_col("label_multi")) {
    throw DataError("label_scenario: table is already labeled");
  }
  const int cls = attack::class_index(attack.mode);
  const std::size_t time_col = table.col("time");
  auto cols = table.columns();
  cols.push_back("label_bin");
  cols.push_back("label_multi");
  SampleTable out(cols);
  out.reserve_rows(table.n_rows());
  std::vector<double> row(cols.size());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    auto src = table.row(r);
    std::copy(src.begin(), src.end(), row.begin());
    const bool attacked = cls != 0 && at_or_after_onset(table.at(r, time_col), attack.onset);
    row[cols.size() - 2] = attacked ? 1.0 : 0.0;
    row[cols.size() - 1] = attacked ? static_cast<double>(cls) : 0.0;
    out.append_row(row);
  }
  return out;
}

SampleTable merge(std::span<const SampleTable> tables) {
  if (tables.empty()) throw DataError("merge: no tables given");
  SampleTable out(tables.front().columns());
  std::size_t total = 0;
  for (const auto& t : tables) {
    if (t.columns() != out.columns()) throw DataError("merge: column schemas differ");
    total += t.n_rows();
  }
  out.raw().reserve(total * out.n_cols());
  for (const auto& t : tables) {
    out.raw().insert(out.raw().end(), t.raw().begin(), t.raw().end());
  }
  return out;
}

SampleTable downsample(const SampleTable& table, const DownsampleOptions& opts) {
  if (!(opts.normal_keep_fraction > 0.0 && opts.normal_keep_fraction <= 1.0)) {
    throw UsageError("normal_keep_fraction must lie in (0, 1]");
  }
  const std::size_t n = table.n_rows();
  const std::size_t bin_col = table.col("label_bin");
  const std::size_t time_col = table.col("time");
  std::vector<char> keep(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    if (table.at(r, bin_col) != 0.0) {
      keep[r] = 1;
    } else {
      keep[r] = unit_double(hash_combine(opts.seed, r)) < opts.normal_keep_fraction;
    }
  }
  if (opts.onset_window > 0.0) {
    // An onset is a 0 -> 1 transition between time-consecutive rows of one scenario.
    for (std::size_t r = 1; r < n; ++r) {
      const bool onset = table.at(r, bin_col) != 0.0 && table.at(r - 1, bin_col) == 0.0 &&
                         table.at(r, time_col) > table.at(r - 1, time_col);
      if (!onset) continue;
      const double t_a = table.at(r, time_col);
      for (std::size_t j = r; j-- > 0;) {
        const double t = table.at(j, time_col);
        if (t > table.at(j + 1, time_col) || t_a - t > opts.onset_window) break;
        keep[j] = 1;
      }
      for (std::size_t j = r; j < n; ++j) {
        const double t = table.at(j, time_col);
        if ((j > r && t < table.at(j - 1, time_col)) || t - t_a > opts.onset_window) break;
        keep[j] = 1;
      }
    }
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < n; ++r) {
    if (keep[r]) rows.push_back(r);
  }
  return table.select_rows(rows);
}

void Moments::merge(const Moments& other) {
  if (other.count == 0.0) return;
  if (count == 0.0) {
    *this = other;
    return;
  }
  const double total = count + other.count;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const double delta = other.mean[k] - mean[k];
    mean[k] += delta * (other.count / total);
    m2[k] += other.m2[k] + delta * delta * (count * other.count / total);
  }
  count = total;
}

std::vector<std::string> feature_columns(const SampleTable& table) {
  std::vector<std::string> out;
  for (const auto& c : table.columns()) {
    if (c != "time" && c != "label_bin" && c != "label_multi") out.push_back(c);
  }
  return out;
}

namespace {

std::vector<std::size_t> column_indices(const SampleTable& table,
                                        const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) idx.push_back(table.col(n));
  return idx;
}

Moments chunk_moments(const SampleTable& table, const std::vector<std::size_t>& cols,
                      std::size_t begin, std::size_t end) {
  Moments m(cols.size());
  for (std::size_t r = begin; r < end; ++r) {
    m.count += 1.0;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double x = table.at(r, cols[k]);
      const double delta = x - m.mean[k];
      m.mean[k] += delta / m.count;
      m.m2[k] += delta * (x - m.mean[k]);
    }
  }
  return m;
}

NormStats finish(std::vector<std::string> names, const Moments& m) {
  NormStats s;
  s.feature_names = std::move(names);
  s.mean = m.mean;
  s.stddev.resize(m.mean.size());
  for (std::size_t k = 0; k < m.mean.size(); ++k) {
    const double sd = std::sqrt(std::max(0.0, m.m2[k] / m.count));
    s.stddev[k] = sd <= 1e-12 * std::max(1.0, std::abs(m.mean[k])) ? 1.0 : sd;
  }
  return s;
}

}  // namespace

NormStats fit_norm_stats(const SampleTable& table, std::size_t chunk_rows) {
  if (chunk_rows == 0) throw UsageError("chunk_rows must be >= 1");
  if (table.n_rows() == 0) throw DataError("fit_norm_stats: empty table");
  auto names = feature_columns(table);
  const auto cols = column_indices(table, names);
  const std::size_t n = table.n_rows();
  const std::size_t n_chunks = (n + chunk_rows - 1) / chunk_rows;
  std::vector<Moments> parts(n_chunks);
  const auto n_chunks_signed = static_cast<std::ptrdiff_t>(n_chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n_chunks_signed; ++c) {
    const auto b = static_cast<std::size_t>(c) * chunk_rows;
    parts[static_cast<std::size_t>(c)] = chunk_moments(table, cols, b, std::min(n, b + chunk_rows));
  }
  // Fixed pairwise tree reduction.
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) {
      parts[i].merge(parts[i + stride]);
    }
  }
  return finish(std::move(names), parts.front());
}

NormStats fit_norm_stats_serial(const SampleTable& table) {
  if (table.n_rows() == 0) throw DataError("fit_norm_stats: empty table");
  auto names = feature_columns(table);
  const auto cols = column_indices(table, names);
  return finish(std::move(names), chunk_moments(table, cols, 0, table.n_rows()));
}

namespace {

SampleTable transform(const SampleTable& table, const NormStats& stats, bool forward) {
  if (feature_columns(table) != stats.feature_names) {
    throw DataError("normalization statistics do not match the table's feature columns");
  }
  const auto cols = column_indices(table, stats.feature_names);
  SampleTable out = table;
  for (std::size_t r = 0; r < out.n_rows(); ++r) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      double& x = out.at(r, cols[k]);
      x = forward ? (x - stats.mean[k]) / stats.stddev[k] : x * stats.stddev[k] + stats.mean[k];
    }
  }
  return out;
}

}  // namespace

SampleTable normalize(const SampleTable& table, const NormStats& stats) {
  return transform(table, stats, true);
}

SampleTable denormalize(const SampleTable& table, const NormStats& stats) {
  return transform(table, stats, false);
}

void save_norm_stats(const NormStats& stats, const std::filesystem::path& path) {
  SampleTable t(stats.feature_names);
  t.append_row(stats.mean);
  t.append_row(stats.stddev);
  write_csv(t, path, 17);
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  SampleTable t = read_csv(path);
  if (t.n_rows() != 2) throw DataError("norm stats file must hold exactly a mean row and a std row");
  NormStats s;
  s.feature_names = t.columns();
  auto m = t.row(0), sd = t.row(1);
  s.mean.assign(m.begin(), m.end());
  s.stddev.assign(sd.begin(), sd.end());
  return s;
}

SampleTable rescale_large_columns(const SampleTable& table, double threshold) {
  SampleTable out = table;
  for (const auto& name : feature_columns(table)) {
    const std::size_t c = table.col(name);
    double max_abs = 0.0;
    for (std::size_t r = 0; r < table.n_rows(); ++r) max_abs = std::max(max_abs, std::abs(table.at(r, c)));
    if (max_abs <= threshold) continue;
    for (std::size_t r = 0; r < out.n_rows(); ++r) out.at(r, c) /= 1000.0;
  }
  return out;
}

SampleTable to_float32(const SampleTable& table) {
  SampleTable out = table;
  for (double& x : out.raw()) x = static_cast<double>(static_cast<float>(x));
  return out;
}

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw UsageError("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
}

SplitResult stratified_split(const SampleTable& table, const SplitSpec& spec) {
  spec.validate();
  const std::size_t label_col = table.col("label_multi");
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    const auto cls = static_cast<std::size_t>(std::lround(table.at(r, label_col)));
    if (cls >= by_class.size()) by_class.resize(cls + 1);
    by_class[cls].push_back(r);
  }
  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t cls = 0; cls < by_class.size(); ++cls) {
    auto& rows = by_class[cls];
    if (rows.empty()) continue;
    if (rows.size() < parts.size()) {
      throw DataError("class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                      " rows, fewer than the 3 partitions");
    }
    // Fisher-Yates with a hash-indexed generator, reproducible across platforms.
    for (std::size_t i = rows.size() - 1; i > 0; --i) {
      const std::size_t j = hash_combine(spec.seed, cls, i) % (i + 1);
      std::swap(rows[i], rows[j]);
    }
    const auto n = static_cast<double>(rows.size());
    const auto n_train = static_cast<std::size_t>(std::llround(spec.ratios[0] * n));
    const auto n_val =
        std::min(rows.size() - n_train, static_cast<std::size_t>(std::llround(spec.ratios[1] * n)));
    parts[0].insert(parts[0].end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    parts[1].insert(parts[1].end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train),
                    rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    parts[2].insert(parts[2].end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                    rows.end());
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return {table.select_rows(parts[0]), table.select_rows(parts[1]), table.select_rows(parts[2])};
}

std::vector<std::size_t> class_histogram(const SampleTable& table, int num_classes) {
  std::vector<std::size_t> h(static_cast<std::size_t>(num_classes), 0);
  const std::size_t c = table.col("label_multi");
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    const auto k = std::lround(table.at(r, c));
    if (k >= 0 && k < num_classes) ++h[static_cast<std::size_t>(k)];
  }
  return h;
}

}  // namespace mgids::data
