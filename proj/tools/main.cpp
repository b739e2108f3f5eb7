// Command-line entry point: simulate, dataset, train, distill, eval, ablate,
// bench, predict. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mgids/errors.hpp"
#include "mgids/pipeline.hpp"

namespace {

using mgids::config::PipelineConfig;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string scenario;
  bool all = false;
  bool binary = false;
  bool multiclass = false;
  bool student = false;
  std::string input;
};

PipelineConfig load(const Options& o) {
  auto cfg = o.config_path.empty() ? mgids::config::default_config()
                                   : mgids::config::load_config(o.config_path);
  if (!o.out_dir.empty()) cfg.paths.out = o.out_dir;
  return cfg;
}

mgids::gbdt::Objective objective(const Options& o) {
  if (o.binary && o.multiclass) throw mgids::UsageError("--binary and --multiclass conflict");
  return o.binary ? mgids::gbdt::Objective::Binary : mgids::gbdt::Objective::Multiclass;
}

int run(const std::string& command, const Options& o) {
  namespace p = mgids::pipeline;
  auto cfg = load(o);
  auto& log = std::cout;
  if (command == "simulate") {
    if (o.seed) cfg.sim.noise.seed = *o.seed;
    std::vector<mgids::attack::AttackMode> modes;
    if (o.all == !o.scenario.empty()) {
      throw mgids::UsageError("simulate needs exactly one of --scenario <mode> or --all");
    }
    if (o.all) {
      for (const auto& s : cfg.scenarios) modes.push_back(s.mode);
    } else {
      modes.push_back(mgids::attack::mode_from_name(o.scenario));
    }
    cfg.validate();
    p::cmd_simulate(cfg, modes, log);
  } else if (command == "dataset") {
    if (o.seed) {
      cfg.dataset.split.seed = *o.seed;
      cfg.dataset.downsample.seed = *o.seed;
    }
    cfg.validate();
    p::cmd_dataset(cfg, log);
  } else if (command == "train") {
    const auto obj = objective(o);
    if (o.seed) (obj == mgids::gbdt::Objective::Binary ? cfg.binary : cfg.multiclass).seed = *o.seed;
    cfg.validate();
    p::cmd_train(cfg, obj, log);
  } else if (command == "distill") {
    if (o.seed) cfg.kd.student.seed = *o.seed;
    cfg.validate();
    p::cmd_distill(cfg, log);
  } else if (command == "eval") {
    if (o.seed) cfg.eval.demo_seed = *o.seed;
    cfg.validate();
    p::cmd_eval(cfg, log);
  } else if (command == "ablate") {
    const auto obj = objective(o);
    if (o.seed) (obj == mgids::gbdt::Objective::Binary ? cfg.binary : cfg.multiclass).seed = *o.seed;
    cfg.validate();
    p::cmd_ablate(cfg, obj, log);
  } else if (command == "bench") {
    cfg.validate();
    p::cmd_bench(cfg, log);
  } else if (command == "predict") {
    if (static_cast<int>(o.binary) + static_cast<int>(o.multiclass) + static_cast<int>(o.student) > 1) {
      throw mgids::UsageError("choose one of --binary, --multiclass, --student");
    }
    const char* model = o.binary ? p::kBinary : o.student ? p::kStudent : p::kMulticlass;
    cfg.validate();
    p::cmd_predict(cfg, model, o.input, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microgrid attack simulator and gradient-boosted intrusion detector"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", o.out_dir, "Output directory (overrides [paths] out)");
  app.add_option("--seed", o.seed, "Override the command's seed");

  auto* sim = app.add_subcommand("simulate", "Simulate scenarios into CSV files");
  sim->add_option("--scenario", o.scenario,
                  "Normal, Additive, Ramp, SlowRamp, Sinusoid, Stealth or DoS");
  sim->add_flag("--all", o.all, "Simulate every configured scenario");

  app.add_subcommand("dataset", "Merge, downsample, split and normalize scenario CSVs");

  auto* train = app.add_subcommand("train", "Train a teacher model");
  auto* distill = app.add_subcommand("distill", "Distill the multiclass teacher into a student");
  app.add_subcommand("eval", "Metrics, confusion matrices, demo and KD trajectory");
  auto* ablate = app.add_subcommand("ablate", "Feature-group ablation");
  app.add_subcommand("bench", "Inference latency and model size");
  auto* predict = app.add_subcommand("predict", "Classify the rows of a scenario CSV");
  predict->add_option("input", o.input, "Scenario-schema CSV")->required()->check(CLI::ExistingFile);
  predict->add_flag("--student", o.student, "Use the distilled student");
  for (auto* sub : {train, ablate, predict}) {
    sub->add_flag("--binary", o.binary, "Binary normal/attack model");
    sub->add_flag("--multiclass", o.multiclass, "7-class model (default)");
  }
  // Global options may also follow the subcommand.
  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();
  }
  (void)distill;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const mgids::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const mgids::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const mgids::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
