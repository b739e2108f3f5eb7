#include "mgids/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "mgids/csv.hpp"
#include "mgids/errors.hpp"
#include "mgids/eval.hpp"

namespace mgids::pipeline {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> class_names() {
  std::vector<std::string> out;
  for (auto m : attack::kAllModes) out.emplace_back(attack::mode_name(m));
  return out;
}

const std::vector<std::string> kBinaryNames{"normal", "attack"};

void require(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw DataError("missing '" + path.string() + "'; run `mgids " + producer + "` first");
  }
}

data::SampleTable read_required(const fs::path& path, const char* producer) {
  require(path, producer);
  return data::read_csv(path);
}

gbdt::BoostedModel load_required(const fs::path& path, const char* producer) {
  require(path, producer);
  return gbdt::load(path);
}

fs::path rescaled_columns_file(const config::PipelineConfig& cfg) {
  return cfg.paths.dataset() / "rescaled_columns.txt";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_histograms(std::ostream& log, const char* name, const data::SampleTable& t) {
  const auto hist = data::class_histogram(t, attack::kNumModes);
  log << name << " rows=" << t.n_rows() << " classes:";
  for (std::size_t c = 0; c < hist.size(); ++c) {
    log << ' ' << attack::mode_name(attack::kAllModes[c]) << '=' << hist[c];
  }
  log << '\n';
}

struct Split {
  data::SampleTable table;
  data::LabeledData data;
};

Split load_split(const config::PipelineConfig& cfg, const std::string& name) {
  Split s;
  s.table = read_required(dataset_csv(cfg, name), "dataset");
  s.data = data::to_labeled_data(s.table);
  return s;
}

const std::vector<int>& labels_for(const data::LabeledData& d, gbdt::Objective objective) {
  return objective == gbdt::Objective::Binary ? d.label_bin : d.label_multi;
}

void write_train_log(const std::vector<gbdt::IterationLog>& log, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "iteration,train_loss,valid_loss\n";
  for (const auto& e : log) {
    out << e.iteration << ',' << data::format_value(e.train_loss, 17) << ',';
    if (e.valid_loss) out << data::format_value(*e.valid_loss, 17);
    out << '\n';
  }
}

// Rows of the test table grouped by scenario: the merge keeps scenarios in
// configured order and each partition keeps row order, so time restarts at
// every scenario boundary.
std::vector<std::pair<std::size_t, std::size_t>> scenario_blocks(const data::SampleTable& t) {
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  const std::size_t tc = t.col("time");
  std::size_t begin = 0;
  for (std::size_t r = 1; r <= t.n_rows(); ++r) {
    if (r == t.n_rows() || t.at(r, tc) < t.at(r - 1, tc)) {
      blocks.emplace_back(begin, r);
      begin = r;
    }
  }
  return blocks;
}

}  // namespace

fs::path scenario_csv(const config::PipelineConfig& cfg, attack::AttackMode mode) {
  return cfg.paths.scenarios() / (std::string(attack::mode_name(mode)) + ".csv");
}

fs::path dataset_csv(const config::PipelineConfig& cfg, const std::string& split) {
  return cfg.paths.dataset() / (split + ".csv");
}

fs::path norm_stats_csv(const config::PipelineConfig& cfg) {
  return cfg.paths.dataset() / "norm_stats.csv";
}

fs::path model_file(const config::PipelineConfig& cfg, const std::string& name) {
  return cfg.paths.models() / (name + ".model");
}

void cmd_simulate(const config::PipelineConfig& cfg, std::span<const attack::AttackMode> modes,
                  std::ostream& log) {
  fs::create_directories(cfg.paths.scenarios());
  for (auto mode : modes) {
    const auto& spec = cfg.scenario(mode);
    const auto table = sim::run_scenario(cfg.sim, spec);
    const auto path = scenario_csv(cfg, mode);
    data::write_csv(table, path);
    const auto hist = data::class_histogram(table, attack::kNumModes);
    const std::size_t attacked = table.n_rows() - hist[0];
    log << attack::mode_name(mode) << ": rows=" << table.n_rows() << " attack_rows=" << attacked;
    if (mode != attack::AttackMode::Normal) {
      log << " onset=" << spec.onset << "s targets=";
      for (std::size_t i = 0; i < spec.targets.size(); ++i) {
        log << (i ? "," : "") << "DG" << spec.targets[i];
      }
    }
    log << " -> " << path.string() << '\n';
  }
}

void cmd_dataset(const config::PipelineConfig& cfg, std::ostream& log) {
  std::vector<data::SampleTable> tables;
  for (const auto& spec : cfg.scenarios) {
    auto t = read_required(scenario_csv(cfg, spec.mode), "simulate --all");
    if (t.columns() != data::labeled_header()) {
      throw DataError("'" + scenario_csv(cfg, spec.mode).string() +
                      "' does not have the scenario CSV schema");
    }
    tables.push_back(std::move(t));
  }
  auto merged = data::merge(tables);
  tables.clear();
  const auto before = data::class_histogram(merged, attack::kNumModes);
  auto sampled = data::downsample(merged, cfg.dataset.downsample);
  const auto after = data::class_histogram(sampled, attack::kNumModes);
  std::size_t attack_before = 0, attack_after = 0;
  for (std::size_t c = 1; c < before.size(); ++c) {
    attack_before += before[c];
    attack_after += after[c];
  }
  log << "merged rows=" << merged.n_rows() << " downsampled rows=" << sampled.n_rows()
      << " attack rows before=" << attack_before << " after=" << attack_after << '\n';
  if (attack_before != attack_after) throw DataError("downsampling dropped attack rows");

  fs::create_directories(cfg.paths.dataset());
  std::vector<std::string> rescaled;
  if (cfg.dataset.rescale) {
    const auto scaled = data::rescale_large_columns(sampled);
    for (const auto& name : data::feature_columns(sampled)) {
      const auto c = sampled.col(name);
      for (std::size_t r = 0; r < sampled.n_rows(); ++r) {
        if (scaled.at(r, c) != sampled.at(r, c)) {
          rescaled.push_back(name);
          break;
        }
      }
    }
    sampled = scaled;
  }
  {
    std::ofstream out(rescaled_columns_file(cfg));
    for (const auto& name : rescaled) out << name << '\n';
  }
  if (cfg.dataset.float32) sampled = data::to_float32(sampled);

  auto parts = data::stratified_split(sampled, cfg.dataset.split);
  const auto stats = data::fit_norm_stats(parts.train, cfg.dataset.chunk_rows);
  data::save_norm_stats(stats, norm_stats_csv(cfg));
  const std::pair<const char*, data::SampleTable*> splits[] = {
      {"train", &parts.train}, {"val", &parts.val}, {"test", &parts.test}};
  for (const auto& [name, table] : splits) {
    *table = data::normalize(*table, stats);
    data::write_csv(*table, dataset_csv(cfg, name));
    write_histograms(log, name, *table);
  }
  // Normalized training columns should be centered.
  const auto check = data::fit_norm_stats_serial(parts.train);
  double worst = 0.0;
  for (double m : check.mean) worst = std::max(worst, std::abs(m));
  log << "normalized train max |mean|=" << fmt(worst) << '\n';
}

void cmd_train(const config::PipelineConfig& cfg, gbdt::Objective objective, std::ostream& log) {
  const bool binary = objective == gbdt::Objective::Binary;
  const auto& params = binary ? cfg.binary : cfg.multiclass;
  const std::string name = binary ? kBinary : kMulticlass;
  const auto train = load_split(cfg, "train");
  const auto val = load_split(cfg, "val");
  std::vector<gbdt::IterationLog> history;
  gbdt::TrainOptions opts;
  opts.feature_names = train.data.feature_names;
  const auto model = gbdt::train(params, train.data.features, train.data.n_rows,
                                 train.data.n_features, labels_for(train.data, objective),
                                 gbdt::ValidSet{val.data.features, val.data.n_rows,
                                                labels_for(val.data, objective)},
                                 opts, &history);
  fs::create_directories(cfg.paths.models());
  gbdt::save(model, model_file(cfg, name));
  write_train_log(history, cfg.paths.models() / (name + "_train_log.csv"));
  const auto pred = eval::predict_classes(model, val.data.features, val.data.n_rows);
  const auto m = eval::compute_metrics(pred, labels_for(val.data, objective), model.num_classes());
  log << name << ": iterations=" << model.iterations_run << " best_iteration="
      << model.best_iteration << " trees=" << model.trees.size()
      << " val_accuracy=" << fmt(m.accuracy) << " val_macro_f1=" << fmt(m.macro_f1) << " -> "
      << model_file(cfg, name).string() << '\n';
}

void cmd_distill(const config::PipelineConfig& cfg, std::ostream& log) {
  const auto teacher = load_required(model_file(cfg, kMulticlass), "train --multiclass");
  const auto train = load_split(cfg, "train");
  const auto val = load_split(cfg, "val");
  const auto test = load_split(cfg, "test");
  const auto logits =
      kd::cached_teacher_logits(teacher, train.data.features, train.data.n_rows,
                                cfg.paths.models() / "cache", cfg.kd_cache_salt);
  gbdt::TrainOptions opts;
  opts.feature_names = train.data.feature_names;
  std::vector<gbdt::IterationLog> history;
  const auto student = kd::distill(
      teacher, train.data.features, train.data.n_rows, train.data.n_features,
      train.data.label_multi, logits,
      gbdt::ValidSet{val.data.features, val.data.n_rows, val.data.label_multi}, cfg.kd, opts,
      &history);
  gbdt::save(student, model_file(cfg, kStudent));
  write_train_log(history, cfg.paths.models() / (std::string(kStudent) + "_train_log.csv"));
  auto report = kd::make_report(teacher, student, test.data.features, test.data.n_rows,
                                test.data.label_multi);
  // Sizes of the files actually written.
  report.teacher_size_bytes = eval::model_size(model_file(cfg, kMulticlass));
  report.student_size_bytes = eval::model_size(model_file(cfg, kStudent));
  report.size_reduction_pct =
      100.0 * (1.0 - static_cast<double>(report.student_size_bytes) /
                         static_cast<double>(report.teacher_size_bytes));
  const auto report_path = cfg.paths.models() / "distill_report.txt";
  report.write(report_path);
  log << "student: trees=" << student.trees.size() << " agreement="
      << fmt(report.argmax_agreement_pct) << "% size_reduction=" << fmt(report.size_reduction_pct)
      << "% accuracy teacher=" << fmt(report.accuracy_teacher)
      << " student=" << fmt(report.accuracy_student) << " -> " << report_path.string() << '\n';
}

void cmd_eval(const config::PipelineConfig& cfg, std::ostream& log) {
  const auto test = load_split(cfg, "test");
  fs::create_directories(cfg.paths.reports());
  const auto reports = cfg.paths.reports();
  int evaluated = 0;
  for (const std::string name : {kBinary, kMulticlass, kStudent}) {
    const auto path = model_file(cfg, name);
    if (!fs::exists(path)) continue;
    ++evaluated;
    const auto model = gbdt::load(path);
    const bool binary = model.params.objective == gbdt::Objective::Binary;
    const auto& labels = labels_for(test.data, model.params.objective);
    const auto pred = eval::predict_classes(model, test.data.features, test.data.n_rows);
    const auto m = eval::compute_metrics(pred, labels, model.num_classes());
    const auto& names = binary ? kBinaryNames : class_names();
    eval::write_metrics_csv(m, names, reports / ("metrics_" + name + ".csv"));
    eval::write_confusion_csv(m, names, reports / ("confusion_" + name + ".csv"));
    for (const auto& w : m.warnings) log << "warning: " << name << ": " << w << '\n';

    const auto importance = gbdt::feature_importance_gain(model);
    {
      std::ofstream out(reports / ("feature_importance_" + name + ".csv"));
      out << "feature,gain\n";
      for (std::size_t f = 0; f < importance.size(); ++f) {
        out << model.feature_names[f] << ',' << data::format_value(importance[f]) << '\n';
      }
    }

    const auto demo = eval::realtime_demo(model, test.table, cfg.eval.demo_n, cfg.eval.demo_seed);
    std::size_t matches = 0;
    {
      std::ofstream out(reports / ("realtime_demo_" + name + ".csv"));
      out << "row,time,prediction,truth,probability,match\n";
      for (const auto& d : demo) {
        matches += d.match();
        out << d.row << ',' << data::format_value(d.time) << ',' << names[d.prediction] << ','
            << names[d.truth] << ',' << data::format_value(d.probability, 6) << ','
            << (d.match() ? "yes" : "no") << '\n';
      }
    }
    log << name << ": test_accuracy=" << fmt(m.accuracy) << " macro_f1=" << fmt(m.macro_f1)
        << " weighted_f1=" << fmt(m.weighted_f1) << " n=" << m.n_samples
        << " realtime_demo=" << matches << '/' << demo.size() << '\n';
  }
  if (evaluated == 0) {
    throw DataError("no trained models in '" + cfg.paths.models().string() +
                    "'; run `mgids train` first");
  }

  const auto teacher_path = model_file(cfg, kMulticlass);
  const auto student_path = model_file(cfg, kStudent);
  if (fs::exists(teacher_path) && fs::exists(student_path)) {
    const auto blocks = scenario_blocks(test.table);
    if (blocks.size() != cfg.scenarios.size()) {
      throw DataError("test split holds " + std::to_string(blocks.size()) +
                      " scenario blocks, config lists " + std::to_string(cfg.scenarios.size()));
    }
    std::size_t which = 0;
    while (cfg.scenarios[which].mode != cfg.eval.trajectory_mode) {
      if (++which == cfg.scenarios.size()) {
        throw UsageError("trajectory scenario is not among the configured scenarios");
      }
    }
    const auto [b0, b1] = blocks[which];
    const std::size_t tc = test.table.col("time");
    std::size_t begin = b0;
    while (begin < b1 && test.table.at(begin, tc) < cfg.eval.trajectory_from) ++begin;
    std::size_t end = begin;
    while (end < b1 && test.table.at(end, tc) <= cfg.eval.trajectory_to) ++end;
    const auto traj = eval::kd_trajectory_report(gbdt::load(teacher_path),
                                                 gbdt::load(student_path), test.table, begin,
                                                 end - begin);
    eval::write_trajectory_csv(traj, reports / "kd_trajectory.csv");
    log << "kd_trajectory: " << attack::mode_name(cfg.eval.trajectory_mode) << " rows="
        << traj.points.size() << " teacher_student_agreement=" << fmt(traj.agreement_pct)
        << "%\n";
  }
}

void cmd_ablate(const config::PipelineConfig& cfg, gbdt::Objective objective, std::ostream& log) {
  const auto train = read_required(dataset_csv(cfg, "train"), "dataset");
  const auto val = read_required(dataset_csv(cfg, "val"), "dataset");
  const auto test = read_required(dataset_csv(cfg, "test"), "dataset");
  const auto& params = objective == gbdt::Objective::Binary ? cfg.binary : cfg.multiclass;
  const auto rows =
      eval::run_ablation(train, val, test, params, eval::AblationSpec::default_groups());
  fs::create_directories(cfg.paths.reports());
  const auto path = cfg.paths.reports() / "ablation.csv";
  eval::write_ablation_csv(rows, path);
  for (const auto& r : rows) {
    log << "ablation " << r.group << ": macro_f1=" << fmt(r.macro_f1)
        << " drop=" << fmt(100.0 * r.drop) << "%\n";
  }
  log << "-> " << path.string() << '\n';
}

void cmd_bench(const config::PipelineConfig& cfg, std::ostream& log) {
  const auto test = load_split(cfg, "test");
  const int saved_threads = omp_get_max_threads();
  omp_set_num_threads(1);
  fs::create_directories(cfg.paths.reports());
  std::ofstream out(cfg.paths.reports() / "latency.txt");
  double teacher_ms = 0.0, student_ms = 0.0;
  for (const std::string name : {kBinary, kMulticlass, kStudent}) {
    const auto path = model_file(cfg, name);
    if (!fs::exists(path)) continue;
    const auto model = gbdt::load(path);
    const auto rep = eval::bench_latency(model, test.data.features, test.data.n_rows, name,
                                         cfg.eval.latency_batch, cfg.eval.latency_reps,
                                         cfg.eval.latency_warmup);
    rep.write(out);
    out << '\n';
    if (name == kMulticlass) teacher_ms = rep.median_ms_per_batch;
    if (name == kStudent) student_ms = rep.median_ms_per_batch;
    log << name << ": median " << fmt(rep.median_ms_per_batch) << " ms/" << rep.batch
        << " (" << fmt(rep.us_per_sample) << " us/sample, threads=1)\n";
  }
  omp_set_num_threads(saved_threads);
  if (teacher_ms > 0.0 && student_ms > 0.0) {
    out << "student_teacher_latency_ratio=" << student_ms / teacher_ms << '\n';
    log << "student/teacher latency ratio=" << fmt(student_ms / teacher_ms) << '\n';
  }

  const auto teacher_path = model_file(cfg, kMulticlass);
  require(teacher_path, "train --multiclass");
  std::ofstream size_out(cfg.paths.reports() / "model_size.txt");
  const auto teacher_bytes = eval::model_size(teacher_path);
  size_out << "teacher_bytes=" << teacher_bytes << '\n';
  log << "multiclass model: " << teacher_bytes << " bytes\n";
  if (fs::exists(model_file(cfg, kBinary))) {
    size_out << "binary_bytes=" << eval::model_size(model_file(cfg, kBinary)) << '\n';
  }
  if (fs::exists(model_file(cfg, kStudent))) {
    const auto student_bytes = eval::model_size(model_file(cfg, kStudent));
    const double ratio = static_cast<double>(student_bytes) / static_cast<double>(teacher_bytes);
    size_out << "student_bytes=" << student_bytes << '\n'
             << "student_teacher_size_ratio=" << ratio << '\n'
             << "teacher_student_size_ratio=" << 1.0 / ratio << '\n';
    log << "student model: " << student_bytes << " bytes (ratio " << fmt(ratio) << ")\n";
  }
}

void cmd_predict(const config::PipelineConfig& cfg, const std::string& model_name,
                 const fs::path& input, std::ostream& out) {
  const auto model = load_required(model_file(cfg, model_name),
                                   model_name == kStudent ? "distill" : "train");
  const auto stats = data::load_norm_stats(norm_stats_csv(cfg));
  auto table = read_required(input, "simulate");
  if (!table.has_col("time")) throw DataError("'" + input.string() + "' has no time column");
  {
    std::ifstream in(rescaled_columns_file(cfg));
    std::string name;
    while (std::getline(in, name)) {
      if (name.empty()) continue;
      const auto c = table.col(name);
      for (std::size_t r = 0; r < table.n_rows(); ++r) table.at(r, c) /= 1000.0;
    }
  }
  if (!table.has_col("label_bin")) {
    // Unlabeled input: add placeholder labels so the shared schema applies.
    data::SampleTable labeled(data::labeled_header());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
      std::vector<double> row(table.row(r).begin(), table.row(r).end());
      row.push_back(0.0);
      row.push_back(0.0);
      labeled.append_row(row);
    }
    table = std::move(labeled);
  }
  const auto normalized = data::normalize(table, stats);
  const auto view = normalized.select_columns(model.feature_names);
  const bool binary = model.params.objective == gbdt::Objective::Binary;
  const auto names = binary ? kBinaryNames : class_names();
  out << "row,predicted,class,probability\n";
  for (std::size_t r = 0; r < view.n_rows(); ++r) {
    const auto proba = model.predict_proba(view.row(r));
    const auto best = std::max_element(proba.begin(), proba.end());
    const auto k = static_cast<std::size_t>(best - proba.begin());
    out << r << ',' << k << ',' << names[k] << ',' << fmt(*best) << '\n';
  }
}

}  // namespace mgids::pipeline
