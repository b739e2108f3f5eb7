#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mgids/gbdt.hpp"
#include "mgids/table.hpp"

namespace mgids::eval {

struct MetricsReport {
  int num_classes = 0;
  std::size_t n_samples = 0;
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::size_t> support;
  double macro_f1 = 0.0;     // over classes with nonzero support
  double weighted_f1 = 0.0;
  std::vector<std::size_t> confusion;  // row = truth, column = prediction
  std::vector<std::string> warnings;

  std::size_t confusion_at(int truth, int pred) const {
    return confusion[static_cast<std::size_t>(truth * num_classes + pred)];
  }
};

/// Precision or recall with a zero denominator is 0.
MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                              int num_classes);

/// class,precision,recall,f1,support rows followed by accuracy/macro/weighted rows.
void write_metrics_csv(const MetricsReport& m, const std::vector<std::string>& class_names,
                       const std::filesystem::path& path);
void write_confusion_csv(const MetricsReport& m, const std::vector<std::string>& class_names,
                         const std::filesystem::path& path);

std::vector<int> predict_classes(const gbdt::BoostedModel& model,
                                 std::span<const double> features, std::size_t n_rows);

struct FeatureGroup {
  std::string name;
  std::vector<std::string> columns;
};

struct AblationSpec {
  std::vector<FeatureGroup> groups;

  /// P, Q, f (per DG) and V, I (per bus).
  static AblationSpec default_groups();
};

struct AblationRow {
  std::string group;  // "baseline" for the full-feature model
  double macro_f1 = 0.0;
  double drop = 0.0;  // baseline macro F1 minus this row's
};

/// Trains the full-feature baseline, then one model per group with that
/// group's columns removed, all with identical params. The label column used
/// follows the objective.
std::vector<AblationRow> run_ablation(const data::SampleTable& train,
                                      const data::SampleTable& valid,
                                      const data::SampleTable& test,
                                      const gbdt::GbdtParams& params, const AblationSpec& spec);

void write_ablation_csv(std::span<const AblationRow> rows, const std::filesystem::path& path);

struct LatencyReport {
  std::string model_id;
  std::size_t batch = 1000;
  int repetitions = 0;
  int warmup = 2;
  std::vector<double> rep_ms;  // every repetition, warm-up included
  double median_ms_per_batch = 0.0;
  double us_per_sample = 0.0;
  int threads = 1;

  void write(std::ostream& out) const;
};

/// Times single-threaded class prediction of the first batch rows, one row at
/// a time. The median is over the repetitions after the first warmup ones.
LatencyReport bench_latency(const gbdt::BoostedModel& model, std::span<const double> features,
                            std::size_t n_rows, std::string model_id, std::size_t batch = 1000,
                            int repetitions = 12, int warmup = 2);

std::uintmax_t model_size(const std::filesystem::path& path);

struct DemoRow {
  std::size_t row = 0;
  double time = 0.0;
  int prediction = 0;
  int truth = 0;
  double probability = 0.0;
  bool match() const { return prediction == truth; }
};

/// Classifies n seeded-random distinct rows of a labeled table one at a time.
std::vector<DemoRow> realtime_demo(const gbdt::BoostedModel& model,
                                   const data::SampleTable& table, std::size_t n,
                                   std::uint64_t seed);

struct TrajectoryPoint {
  double time = 0.0;
  int truth = 0;
  int teacher = 0;
  int student = 0;
};

struct TrajectoryReport {
  std::vector<TrajectoryPoint> points;
  double agreement_pct = 0.0;
};

/// Time-ordered class predictions of rows [begin, begin + length) of a test
/// table whose rows keep their original order.
TrajectoryReport kd_trajectory_report(const gbdt::BoostedModel& teacher,
                                      const gbdt::BoostedModel& student,
                                      const data::SampleTable& table, std::size_t begin,
                                      std::size_t length);

void write_trajectory_csv(const TrajectoryReport& r, const std::filesystem::path& path);

}  // namespace mgids::eval
