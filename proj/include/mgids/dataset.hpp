#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mgids/attack.hpp"
#include "mgids/table.hpp"

namespace mgids::data {

/// True when a row at time t belongs to the attack window starting at onset.
/// Tolerates the rounding of t = k * dt and of 9-digit CSV time stamps.
bool at_or_after_onset(double t, double onset);

/// Appends label_bin / label_multi. Rows before the onset (and every row of a
/// Normal scenario) get (0, 0); the rest get (1, class index of the mode).
SampleTable label_scenario(const SampleTable& table, const attack::AttackSpec& attack);

/// Row-concatenation of identically-shaped tables.
SampleTable merge(std::span<const SampleTable> tables);

struct DownsampleOptions {
  double normal_keep_fraction = 0.12;
  double onset_window = 0.005;  // s; normal rows this close to an onset are always kept
  std::uint64_t seed = 7;
};

/// Keeps every attack row, a seeded Bernoulli sample of normal rows, and all
/// normal rows within the onset window of a 0 -> 1 label transition.
SampleTable downsample(const SampleTable& table, const DownsampleOptions& opts);

/// Per-feature z-score statistics (population standard deviation).
struct NormStats {
  std::vector<std::string> feature_names;
  std::vector<double> mean;
  std::vector<double> stddev;  // constant columns store 1

  std::size_t size() const { return mean.size(); }
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Running moments of one column block; merge is Chan's pairwise update.
struct Moments {
  double count = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;

  explicit Moments(std::size_t n_features = 0) : mean(n_features, 0.0), m2(n_features, 0.0) {}
  void merge(const Moments& other);
};

/// Names of the feature columns of a table (everything but time and labels).
std::vector<std::string> feature_columns(const SampleTable& table);

/// Streaming single-pass statistics over chunks of chunk_rows rows. Chunk
/// moments are merged pairwise in a fixed order, so the result does not
/// depend on the number of threads.
NormStats fit_norm_stats(const SampleTable& table, std::size_t chunk_rows);

/// Reference: one Welford pass over all rows, no chunking or threads.
NormStats fit_norm_stats_serial(const SampleTable& table);

SampleTable normalize(const SampleTable& table, const NormStats& stats);
SampleTable denormalize(const SampleTable& table, const NormStats& stats);

void save_norm_stats(const NormStats& stats, const std::filesystem::path& path);
NormStats load_norm_stats(const std::filesystem::path& path);

/// Memory mitigations: divide columns whose max |x| exceeds threshold by 1000,
/// and round every value through float32.
SampleTable rescale_large_columns(const SampleTable& table, double threshold = 1000.0);
SampleTable to_float32(const SampleTable& table);

struct SplitSpec {
  std::array<double, 3> ratios{0.70, 0.15, 0.15};
  std::uint64_t seed = 11;
  void validate() const;
};

struct SplitResult {
  SampleTable train;
  SampleTable val;
  SampleTable test;
};

/// Stratified on label_multi with a seeded shuffle inside each class. Each
/// partition keeps the original row order.
SplitResult stratified_split(const SampleTable& table, const SplitSpec& spec);

/// Row counts per multiclass label, indexed by class.
std::vector<std::size_t> class_histogram(const SampleTable& table, int num_classes);

}  // namespace mgids::data
