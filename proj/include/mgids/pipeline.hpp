#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "mgids/config.hpp"

namespace mgids::pipeline {

// Artifact locations under the configured directories.
std::filesystem::path scenario_csv(const config::PipelineConfig& cfg, attack::AttackMode mode);
std::filesystem::path dataset_csv(const config::PipelineConfig& cfg, const std::string& split);
std::filesystem::path norm_stats_csv(const config::PipelineConfig& cfg);
std::filesystem::path model_file(const config::PipelineConfig& cfg, const std::string& name);

/// Model names used for files and reports.
inline constexpr const char* kBinary = "binary";
inline constexpr const char* kMulticlass = "multiclass";
inline constexpr const char* kStudent = "student";

/// Simulates each mode and writes <scenarios>/<Mode>.csv.
void cmd_simulate(const config::PipelineConfig& cfg, std::span<const attack::AttackMode> modes,
                  std::ostream& log);

/// Merge, downsample, split, fit normalization on train, and write
/// train/val/test CSVs plus norm_stats.csv.
void cmd_dataset(const config::PipelineConfig& cfg, std::ostream& log);

/// Trains the binary or multiclass teacher and writes its model and loss log.
void cmd_train(const config::PipelineConfig& cfg, gbdt::Objective objective, std::ostream& log);

/// Distills the multiclass teacher into the student and writes the KD report.
void cmd_distill(const config::PipelineConfig& cfg, std::ostream& log);

/// Metrics, confusion matrices, feature importance, the real-time demo and the
/// KD class trajectory for every trained model.
void cmd_eval(const config::PipelineConfig& cfg, std::ostream& log);

/// Feature-group ablation with the given objective's teacher parameters.
void cmd_ablate(const config::PipelineConfig& cfg, gbdt::Objective objective, std::ostream& log);

/// Single-threaded latency and model-size reports.
void cmd_bench(const config::PipelineConfig& cfg, std::ostream& log);

/// Classifies the rows of a raw scenario-schema CSV one at a time and prints
/// row, predicted class, class name and probability.
void cmd_predict(const config::PipelineConfig& cfg, const std::string& model_name,
                 const std::filesystem::path& input, std::ostream& out);

}  // namespace mgids::pipeline
