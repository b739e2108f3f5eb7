#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgids/gbdt.hpp"

namespace mgids::kd {

struct KDConfig {
  double alpha = 0.5;        // hard-label weight
  double beta = 0.5;         // soft-label weight
  double temperature = 2.0;  // T
  gbdt::GbdtParams student = gbdt::GbdtParams::student();

  void validate() const;
};

/// softmax(logits / T).
std::vector<double> soften(std::span<const double> logits, double temperature);

/// q = (alpha * y + beta * soften(teacher_logits, T)) / (alpha + beta).
std::vector<double> kd_targets(std::span<const double> y_onehot,
                               std::span<const double> teacher_logits, const KDConfig& cfg);

/// Row-major teacher raw scores for a row-major feature batch.
std::vector<double> teacher_logits(const gbdt::BoostedModel& teacher,
                                   std::span<const double> features, std::size_t n_rows);

/// FNV-1a over bytes; used to key the teacher-logit cache.
std::uint64_t content_hash(std::span<const char> bytes, std::uint64_t seed = 0);

/// Loads teacher logits from cache_dir when a file for (model hash, data hash)
/// exists, otherwise computes and stores them.
std::vector<double> cached_teacher_logits(const gbdt::BoostedModel& teacher,
                                          std::span<const double> features, std::size_t n_rows,
                                          const std::filesystem::path& cache_dir,
                                          std::uint64_t salt = 0);

struct DistillReport {
  std::size_t teacher_size_bytes = 0;
  std::size_t student_size_bytes = 0;
  double size_reduction_pct = 0.0;
  double argmax_agreement_pct = 0.0;
  double accuracy_teacher = 0.0;
  double accuracy_student = 0.0;

  void write(const std::filesystem::path& path) const;
};

/// Trains a student against blended hard/soft targets. logits holds the
/// teacher's raw scores for the training rows (num_class per row).
gbdt::BoostedModel distill(const gbdt::BoostedModel& teacher, std::span<const double> features,
                           std::size_t n_rows, std::size_t n_features,
                           std::span<const int> labels, std::span<const double> logits,
                           const std::optional<gbdt::ValidSet>& valid, const KDConfig& cfg,
                           const gbdt::TrainOptions& options = {},
                           std::vector<gbdt::IterationLog>* log = nullptr);

/// Sizes from serialized text plus argmax agreement and accuracy on held-out rows.
DistillReport make_report(const gbdt::BoostedModel& teacher, const gbdt::BoostedModel& student,
                          std::span<const double> features, std::size_t n_rows,
                          std::span<const int> labels);

}  // namespace mgids::kd
