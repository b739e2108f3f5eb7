// Acceptance gate: one PASS/FAIL line per criterion. Quantitative criteria run
// the real pipeline on the desk-scale configuration in ./acceptance_out.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "mgids/attack.hpp"
#include "mgids/csv.hpp"
#include "mgids/dataset.hpp"
#include "mgids/distill.hpp"
#include "mgids/eval.hpp"
#include "mgids/gbdt.hpp"
#include "mgids/pipeline.hpp"
#include "mgids/rng.hpp"
#include "mgids/sim.hpp"

using namespace mgids;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  [%2d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void consensus_restoration() {
  const auto cfg = config::default_config();
  attack::AttackSpec normal;
  normal.mode = attack::AttackMode::Normal;
  std::vector<sim::DGState> last;
  const auto t0 = Clock::now();
  const auto table = sim::run_scenario(cfg.sim, normal, [&](double, std::span<const sim::DGState> s) {
    last.assign(s.begin(), s.end());
  });
  const double runtime = seconds_since(t0);
  double worst_f = 0.0, worst_v = 0.0;
  for (const auto& s : last) {
    worst_f = std::max(worst_f, std::abs(s.f() - 60.0));
    worst_v = std::max(worst_v, std::abs(s.v - 1.0));
  }
  const bool pass = table.n_rows() == 10001 && worst_f < 1e-3 && worst_v < 1e-3 && runtime < 5.0;
  report(1, "consensus restoration", pass,
         fmt("max|f-60|=%.3g Hz, max|V-1|=%.3g pu (< 1e-3), rows=%zu, runtime=%.2f s (< 5)",
             worst_f, worst_v, table.n_rows(), runtime));
}

// Closed-form injected offsets, written independently of the injector.
attack::Offsets oracle_offsets(const attack::AttackSpec& s, double t) {
  const double tau = t - s.onset, pi = std::numbers::pi;
  const auto& p = s.params;
  switch (s.mode) {
    case attack::AttackMode::Additive:
      return {p.bias, p.bias};
    case attack::AttackMode::Ramp:
      return {p.ramp_slope * tau, 0.0};
    case attack::AttackMode::SlowRamp:
      return {0.0, p.slow_ramp_slope * tau};
    case attack::AttackMode::Sinusoid:
      return {p.amplitude * std::sin(p.omega * tau), p.amplitude * std::sin(p.omega * tau)};
    case attack::AttackMode::Stealth: {
      const double freqs[] = {1.1, 1.1 * std::sqrt(2.0), 1.1 * std::sqrt(5.0)};
      const double weights[] = {0.5, 0.3, 0.2};
      double f = 0.0;
      for (std::uint64_t k = 0; k < 3; ++k) {
        const double phase =
            p.stealth_seed ? 2.0 * pi * unit_double(hash_combine(p.stealth_seed, k)) : 0.0;
        f += weights[k] * p.stealth_amplitude * std::sin(2.0 * pi * freqs[k] * tau + phase);
      }
      return {f, p.stealth_alpha * f};
    }
    default:
      return {};
  }
}

void injector_equivalence() {
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> sig(-1.0, 1.0), time(0.0, 1.0);
  double worst = 0.0;
  std::size_t pre_mismatch = 0, pre_probes = 0;
  for (auto mode : attack::kAllModes) {
    if (mode == attack::AttackMode::Normal) continue;
    attack::AttackSpec s;
    s.mode = mode;
    if (mode == attack::AttackMode::DoS) {
      // Time-ordered probes through one latch: xi freezes at the first post-onset value.
      std::vector<double> ts(1000);
      for (double& t : ts) t = time(rng);
      std::sort(ts.begin(), ts.end());
      attack::DosLatch latch;
      std::optional<double> frozen;
      for (double t : ts) {
        const double xi = sig(rng), zeta = sig(rng);
        const auto out = attack::apply_attack(s, xi, zeta, t, latch);
        if (t < s.onset) {
          ++pre_probes;
          pre_mismatch += std::bit_cast<std::uint64_t>(out.xi) != std::bit_cast<std::uint64_t>(xi) ||
                          std::bit_cast<std::uint64_t>(out.zeta) != std::bit_cast<std::uint64_t>(zeta);
          continue;
        }
        if (!frozen) frozen = xi;
        worst = std::max({worst, std::abs(out.xi - *frozen), std::abs(out.zeta - zeta)});
      }
      continue;
    }
    for (int k = 0; k < 1000; ++k) {
      const double xi = sig(rng), zeta = sig(rng), t = time(rng);
      attack::DosLatch latch;
      const auto out = attack::apply_attack(s, xi, zeta, t, latch);
      if (t < s.onset) {
        ++pre_probes;
        pre_mismatch += std::bit_cast<std::uint64_t>(out.xi) != std::bit_cast<std::uint64_t>(xi) ||
                        std::bit_cast<std::uint64_t>(out.zeta) != std::bit_cast<std::uint64_t>(zeta);
        continue;
      }
      const auto o = oracle_offsets(s, t);
      worst = std::max({worst, std::abs(out.xi - (xi + o.xi)), std::abs(out.zeta - (zeta + o.zeta))});
    }
  }
  report(2, "attack injector equivalence", worst <= 1e-12 && pre_mismatch == 0,
         fmt("6 modes x 1000 probes, max abs error=%.3g (<= 1e-12), pre-onset bitwise "
             "mismatches=%zu of %zu",
             worst, pre_mismatch, pre_probes));
}

void split_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> gu(-1.0, 1.0), hu(0.01, 1.0);
  int agree = 0;
  double worst_gain = 0.0;
  const int n_sets = 50;
  for (int set = 0; set < n_sets; ++set) {
    const std::size_t n = 20 + rng() % 181;  // <= 200
    const std::size_t nf = 1 + rng() % 4;   // <= 4
    const int levels = 2 + static_cast<int>(rng() % 12);
    const int min_leaf = 1 + static_cast<int>(rng() % 8);
    const double lambda = 1.0;
    std::vector<double> x(n * nf), g(n), h(n);
    for (double& v : x) v = static_cast<double>(rng() % static_cast<unsigned>(levels)) * 0.5;
    for (std::size_t r = 0; r < n; ++r) g[r] = gu(rng), h[r] = hu(rng);

    const auto bins = gbdt::build_bins(x, n, nf, 255);
    const auto binned = gbdt::bin_matrix(x, n, nf, bins);
    gbdt::Histogram hist(nf, 255);
    for (std::size_t f = 0; f < nf; ++f) {
      for (std::size_t r = 0; r < n; ++r) {
        auto& e = hist.feature(f)[binned.column(f)[r]];
        e.sum_g += g[r];
        e.sum_h += h[r];
        ++e.count;
      }
    }
    std::vector<int> nb(nf);
    for (std::size_t f = 0; f < nf; ++f) nb[f] = bins[f].n_bins();
    const auto s = gbdt::best_split(hist, nb, {}, lambda, min_leaf);

    // Exhaustive search over midpoints of consecutive distinct raw values.
    int best_f = -1;
    double best_thr = 0.0, best_gain = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<double> vals;
      for (std::size_t r = 0; r < n; ++r) vals.push_back(x[r * nf + f]);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const double thr = 0.5 * (vals[i] + vals[i + 1]);
        double gl = 0, hl = 0, gr = 0, hr = 0;
        int cl = 0, cr = 0;
        for (std::size_t r = 0; r < n; ++r) {
          if (x[r * nf + f] <= thr) {
            gl += g[r], hl += h[r], ++cl;
          } else {
            gr += g[r], hr += h[r], ++cr;
          }
        }
        if (cl < min_leaf || cr < min_leaf) continue;
        const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                            (gl + gr) * (gl + gr) / (hl + hr + lambda);
        if (gain > best_gain) best_gain = gain, best_f = static_cast<int>(f), best_thr = thr;
      }
    }
    bool ok;
    if (best_f < 0) {
      ok = !s.valid();
    } else {
      ok = s.valid() && s.feature == best_f &&
           bins[static_cast<std::size_t>(s.feature)].threshold(s.bin) == best_thr &&
           std::abs(s.gain - best_gain) <= 1e-9;
      if (s.valid()) worst_gain = std::max(worst_gain, std::abs(s.gain - best_gain));
    }
    agree += ok;
  }
  report(3, "GBDT split oracle", agree == n_sets,
         fmt("%d/%d random datasets match (feature, threshold, gain), max gain diff=%.3g (<= 1e-9)",
             agree, n_sets, worst_gain));
}

// ---------------------------------------------------------------------------

struct Split {
  data::SampleTable table;
  data::LabeledData data;
};

Split load_split(const config::PipelineConfig& cfg, const std::string& name) {
  Split s;
  s.table = data::read_csv(pipeline::dataset_csv(cfg, name));
  s.data = data::to_labeled_data(s.table);
  return s;
}

double loss_monotonicity(const Split& train) {
  auto p = gbdt::GbdtParams::multiclass_teacher();
  p.feature_fraction = 1.0;
  p.bagging_fraction = 1.0;
  p.num_iterations = 200;
  std::vector<gbdt::IterationLog> log;
  const auto& d = train.data;
  gbdt::train(p, d.features, d.n_rows, d.n_features, d.label_multi, std::nullopt, {}, &log);
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 1; i < log.size(); ++i) {
    const double rise = log[i].train_loss - log[i - 1].train_loss;
    if (rise > 0.0) ++violations, worst = std::max(worst, rise);
  }
  report(4, "loss monotonicity", log.size() == 200 && violations == 0,
         fmt("%zu iterations, loss %.4f -> %.4f, increases=%zu (max %.3g)", log.size(),
             log.empty() ? 0.0 : log.front().train_loss, log.empty() ? 0.0 : log.back().train_loss,
             violations, worst));
  return log.empty() ? 0.0 : log.back().train_loss;
}

// Rebuilds the un-normalized training split exactly as the dataset command does.
data::SampleTable raw_train_split(const config::PipelineConfig& cfg, std::size_t* attack_before,
                                  std::size_t* attack_after, data::SplitResult* parts_out) {
  std::vector<data::SampleTable> tables;
  for (const auto& spec : cfg.scenarios) tables.push_back(data::read_csv(pipeline::scenario_csv(cfg, spec.mode)));
  const auto merged = data::merge(tables);
  const auto sampled = data::downsample(merged, cfg.dataset.downsample);
  const auto before = data::class_histogram(merged, attack::kNumModes);
  const auto after = data::class_histogram(sampled, attack::kNumModes);
  *attack_before = *attack_after = 0;
  for (std::size_t c = 1; c < before.size(); ++c) *attack_before += before[c], *attack_after += after[c];
  *parts_out = data::stratified_split(sampled, cfg.dataset.split);
  return parts_out->train;
}

void normalization_and_split(const config::PipelineConfig& cfg, const Split& train) {
  std::size_t attack_before = 0, attack_after = 0;
  data::SplitResult parts;
  const auto raw = raw_train_split(cfg, &attack_before, &attack_after, &parts);
  const auto chunked = data::fit_norm_stats(raw, cfg.dataset.chunk_rows);
  const auto serial = data::fit_norm_stats_serial(raw);
  double rel = 0.0;
  for (std::size_t k = 0; k < chunked.size(); ++k) {
    rel = std::max(rel, std::abs(chunked.mean[k] - serial.mean[k]) / std::max(1e-300, std::abs(serial.mean[k])));
    rel = std::max(rel, std::abs(chunked.stddev[k] - serial.stddev[k]) / serial.stddev[k]);
  }
  // Statistics of the normalized training split written by the pipeline.
  const auto norm = data::fit_norm_stats_serial(train.table);
  double worst_mean = 0.0, worst_std = 0.0;
  std::string worst_col;
  for (std::size_t k = 0; k < norm.size(); ++k) {
    worst_mean = std::max(worst_mean, std::abs(norm.mean[k]));
    const double d = std::abs(norm.stddev[k] - 1.0);
    if (d > worst_std) worst_std = d, worst_col = norm.feature_names[k];
  }
  report(5, "normalization", rel <= 1e-9 && worst_mean < 1e-6 && worst_std < 1e-3,
         fmt("chunked vs single-pass max rel diff=%.3g (<= 1e-9), normalized train max|mean|=%.3g "
             "(< 1e-6), max|std-1|=%.3g%s%s (< 1e-3)",
             rel, worst_mean, worst_std, worst_col.empty() ? "" : " at ", worst_col.c_str()));

  // Split proportions per class.
  const auto h_train = data::class_histogram(parts.train, attack::kNumModes);
  const auto h_val = data::class_histogram(parts.val, attack::kNumModes);
  const auto h_test = data::class_histogram(parts.test, attack::kNumModes);
  double worst_dev = 0.0;
  for (std::size_t c = 0; c < h_train.size(); ++c) {
    const double total = static_cast<double>(h_train[c] + h_val[c] + h_test[c]);
    if (total == 0.0) continue;
    worst_dev = std::max({worst_dev, std::abs(h_train[c] / total - 0.70),
                          std::abs(h_val[c] / total - 0.15), std::abs(h_test[c] / total - 0.15)});
  }
  report(6, "downsample/split contracts", attack_before == attack_after && worst_dev <= 0.005,
         fmt("attack rows %zu -> %zu (dropped %zu), worst per-class split deviation=%.3f%% (<= 0.5%%)",
             attack_before, attack_after, attack_before - attack_after, 100.0 * worst_dev));
}

bool same_predictions(const gbdt::BoostedModel& m, std::span<const double> rows, std::size_t n) {
  std::stringstream ss;
  gbdt::save(m, ss);
  const auto back = gbdt::load(ss);
  const auto k = static_cast<std::size_t>(m.num_outputs());
  std::vector<double> a(k), b(k);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = rows.subspan(r * m.num_features, m.num_features);
    m.predict_raw(row, a);
    back.predict_raw(row, b);
    if (a != b) return false;
  }
  return true;
}

void serialization_and_kd(const config::PipelineConfig& cfg, const Split& train, const Split& val,
                          const Split& test) {
  const auto& d = train.data;
  const gbdt::ValidSet valid{val.data.features, val.data.n_rows, val.data.label_multi};
  gbdt::TrainOptions opts;
  opts.feature_names = d.feature_names;
  const auto teacher = gbdt::train(cfg.multiclass, d.features, d.n_rows, d.n_features,
                                   d.label_multi, valid, opts);
  const auto logits = kd::teacher_logits(teacher, d.features, d.n_rows);
  const auto student = kd::distill(teacher, d.features, d.n_rows, d.n_features, d.label_multi,
                                   logits, valid, cfg.kd, opts);

  // 1000 random rows: half drawn from the test split, half synthetic.
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd(0.0, 2.0);
  const std::size_t nf = d.n_features;
  std::vector<double> rows;
  for (int i = 0; i < 500; ++i) {
    const std::size_t r = rng() % test.data.n_rows;
    rows.insert(rows.end(), test.data.features.begin() + static_cast<std::ptrdiff_t>(r * nf),
                test.data.features.begin() + static_cast<std::ptrdiff_t>((r + 1) * nf));
  }
  for (std::size_t i = 0; i < 500 * nf; ++i) rows.push_back(nd(rng));
  const bool t_ok = same_predictions(teacher, rows, 1000);
  const bool s_ok = same_predictions(student, rows, 1000);
  report(7, "serialization", t_ok && s_ok,
         fmt("save/load/predict identical on 1000 rows: teacher=%s (%zu trees), student=%s (%zu trees)",
             t_ok ? "yes" : "no", teacher.trees.size(), s_ok ? "yes" : "no", student.trees.size()));

  auto hard = cfg.kd;
  hard.alpha = 1.0;
  hard.beta = 0.0;
  const auto kd_hard = kd::distill(teacher, d.features, d.n_rows, d.n_features, d.label_multi,
                                   logits, valid, hard, opts);
  const auto plain = gbdt::train(hard.student, d.features, d.n_rows, d.n_features, d.label_multi,
                                 valid, opts);
  std::ostringstream a, b;
  gbdt::save(kd_hard, a);
  gbdt::save(plain, b);
  report(8, "KD reductions", a.str() == b.str(),
         fmt("beta=0 student and plain training serialize identically: %s (%zu bytes)",
             a.str() == b.str() ? "yes" : "no", a.str().size()));
}

// ---------------------------------------------------------------------------

struct ModelScore {
  eval::MetricsReport metrics;
  std::vector<int> predictions;
};

ModelScore score(const gbdt::BoostedModel& m, const Split& test, bool binary) {
  ModelScore s;
  s.predictions = eval::predict_classes(m, test.data.features, test.data.n_rows);
  s.metrics = eval::compute_metrics(s.predictions, binary ? test.data.label_bin : test.data.label_multi,
                                    m.num_classes());
  return s;
}

}  // namespace

int main() {
  std::printf("acceptance: desk-scale configuration, single seed\n");
  consensus_restoration();
  injector_equivalence();
  split_oracle();

  auto cfg = config::default_config();
  cfg.paths.out = fs::current_path() / "acceptance_out";
  fs::remove_all(cfg.paths.out);
  std::ostringstream log;
  const auto t0 = Clock::now();
  try {
    std::vector<attack::AttackMode> modes;
    for (const auto& s : cfg.scenarios) modes.push_back(s.mode);
    pipeline::cmd_simulate(cfg, modes, log);
    pipeline::cmd_dataset(cfg, log);
    pipeline::cmd_train(cfg, gbdt::Objective::Multiclass, log);
    pipeline::cmd_train(cfg, gbdt::Objective::Binary, log);
    pipeline::cmd_distill(cfg, log);
    pipeline::cmd_eval(cfg, log);
  } catch (const std::exception& e) {
    std::printf("FAIL  pipeline aborted: %s\n", e.what());
    return 1;
  }
  const double pipeline_s = seconds_since(t0);

  const auto train = load_split(cfg, "train");
  const auto val = load_split(cfg, "val");
  const auto test = load_split(cfg, "test");

  loss_monotonicity(train);
  normalization_and_split(cfg, train);
  serialization_and_kd(cfg, train, val, test);

  const auto teacher = gbdt::load(pipeline::model_file(cfg, pipeline::kMulticlass));
  const auto binary = gbdt::load(pipeline::model_file(cfg, pipeline::kBinary));
  const auto student = gbdt::load(pipeline::model_file(cfg, pipeline::kStudent));

  const auto mc = score(teacher, test, false);
  report(9, "multiclass accuracy", mc.metrics.accuracy >= 0.95 && mc.metrics.macro_f1 >= 0.95 &&
                                       pipeline_s < 300.0,
         fmt("accuracy=%.4f (>= 0.95), macro F1=%.4f (>= 0.95), %zu test rows, pipeline %.1f s (< 300)",
             mc.metrics.accuracy, mc.metrics.macro_f1, mc.metrics.n_samples, pipeline_s));

  const auto bc = score(binary, test, true);
  report(10, "binary accuracy", bc.metrics.accuracy >= 0.90,
         fmt("accuracy=%.4f (>= 0.90)", bc.metrics.accuracy));

  {
    const auto sc = score(student, test, false);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < sc.predictions.size(); ++i) agree += sc.predictions[i] == mc.predictions[i];
    const double agreement = 100.0 * static_cast<double>(agree) / static_cast<double>(sc.predictions.size());
    const auto t_size = eval::model_size(pipeline::model_file(cfg, pipeline::kMulticlass));
    const auto s_size = eval::model_size(pipeline::model_file(cfg, pipeline::kStudent));
    const double size_ratio = static_cast<double>(s_size) / static_cast<double>(t_size);
    omp_set_num_threads(1);
    const auto& f = test.data.features;
    const auto lt = eval::bench_latency(teacher, f, test.data.n_rows, "teacher", cfg.eval.latency_batch,
                                        cfg.eval.latency_reps, cfg.eval.latency_warmup);
    const auto ls = eval::bench_latency(student, f, test.data.n_rows, "student", cfg.eval.latency_batch,
                                        cfg.eval.latency_reps, cfg.eval.latency_warmup);
    const double latency_ratio = ls.median_ms_per_batch / lt.median_ms_per_batch;
    report(11, "student vs teacher", agreement >= 99.0 && size_ratio <= 0.25 && latency_ratio <= 0.5,
           fmt("agreement=%.2f%% (>= 99), size %ju/%ju bytes ratio=%.3f (<= 0.25), "
               "latency %.3f/%.3f ms per %zu ratio=%.3f (<= 0.5); trees %zu/%zu",
               agreement, static_cast<std::uintmax_t>(s_size), static_cast<std::uintmax_t>(t_size),
               size_ratio, ls.median_ms_per_batch, lt.median_ms_per_batch, cfg.eval.latency_batch,
               latency_ratio, student.trees.size(), teacher.trees.size()));
  }

  {
    const auto rows = eval::run_ablation(train.table, val.table, test.table, cfg.multiclass,
                                         eval::AblationSpec::default_groups());
    fs::create_directories(cfg.paths.reports());
    eval::write_ablation_csv(rows, cfg.paths.reports() / "ablation.csv");
    std::string detail = fmt("baseline %.4f; drops:", rows.front().macro_f1);
    const eval::AblationRow* top = nullptr;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      detail += fmt(" %s=%+.4f", rows[i].group.c_str(), rows[i].drop);
      if (!top || rows[i].drop > top->drop) top = &rows[i];
    }
    detail += fmt("; largest=%s (want V)", top ? top->group.c_str() : "none");
    report(12, "ablation direction", top && top->group == "V", detail);
  }

  {
    const auto demo = eval::realtime_demo(teacher, test.table, cfg.eval.demo_n, cfg.eval.demo_seed);
    const auto matches = std::count_if(demo.begin(), demo.end(), [](const auto& r) { return r.match(); });
    report(13, "real-time demo", demo.size() == 10 && matches >= 9,
           fmt("%td/%zu matches (>= 9)", matches, demo.size()));
  }

  std::printf("acceptance: %d of 13 criteria failed; artifacts in %s\n", failures,
              cfg.paths.out.string().c_str());
  return failures == 0 ? 0 : 1;
}
