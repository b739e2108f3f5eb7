#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mgids/attack.hpp"
#include "mgids/dataset.hpp"
#include "mgids/distill.hpp"
#include "mgids/gbdt.hpp"
#include "mgids/sim.hpp"

namespace mgids::config {

struct Paths {
  std::filesystem::path out = "out";
  // Relative subdirectories resolve against out.
  std::filesystem::path scenario_dir = "scenarios";
  std::filesystem::path dataset_dir = "dataset";
  std::filesystem::path model_dir = "models";
  std::filesystem::path report_dir = "reports";

  std::filesystem::path scenarios() const { return out / scenario_dir; }
  std::filesystem::path dataset() const { return out / dataset_dir; }
  std::filesystem::path models() const { return out / model_dir; }
  std::filesystem::path reports() const { return out / report_dir; }
};

struct DatasetOptions {
  data::DownsampleOptions downsample;
  data::SplitSpec split;
  std::size_t chunk_rows = 4096;
  bool rescale = false;
  bool float32 = false;
};

struct EvalOptions {
  std::size_t latency_batch = 1000;
  int latency_reps = 12;
  int latency_warmup = 2;
  std::size_t demo_n = 10;
  std::uint64_t demo_seed = 5;
  // KD trajectory window: one scenario's test rows within [t_from, t_to].
  attack::AttackMode trajectory_mode = attack::AttackMode::Ramp;
  double trajectory_from = 0.6;
  double trajectory_to = 1.0;
};

struct PipelineConfig {
  Paths paths;
  sim::SimConfig sim;
  std::vector<attack::AttackSpec> scenarios;  // one per mode, in merge order
  DatasetOptions dataset;
  gbdt::GbdtParams binary = gbdt::GbdtParams::binary_teacher();
  gbdt::GbdtParams multiclass = gbdt::GbdtParams::multiclass_teacher();
  kd::KDConfig kd;
  std::uint64_t kd_cache_salt = 0;
  EvalOptions eval;

  /// Scenario spec for one mode; throws UsageError when the mode is not configured.
  const attack::AttackSpec& scenario(attack::AttackMode mode) const;

  void validate() const;
};

/// Built-in defaults: all seven modes with onset 0.7 s on DG1.
PipelineConfig default_config();

/// Reads an INI file on top of the defaults. Unknown sections or keys are
/// usage errors so typos do not silently fall back to defaults.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::istream& in);

}  // namespace mgids::config
