#include "mgids/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

#include "mgids/errors.hpp"
#include "mgids/rng.hpp"

namespace mgids::eval {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.precision(10);
  return out;
}

std::string class_label(const std::vector<std::string>& names, int k) {
  return static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)]
                                                    : std::to_string(k);
}

}  // namespace

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                              int num_classes) {
  if (predictions.size() != labels.size()) {
    throw DataError("compute_metrics: " + std::to_string(predictions.size()) +
                    " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DataError("compute_metrics: empty input");
  if (num_classes < 1) throw UsageError("compute_metrics: need at least one class");
  MetricsReport m;
  const auto k = static_cast<std::size_t>(num_classes);
  m.num_classes = num_classes;
  m.n_samples = labels.size();
  m.confusion.assign(k * k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("compute_metrics: class index out of range at row " + std::to_string(i));
    }
    ++m.confusion[static_cast<std::size_t>(y) * k + static_cast<std::size_t>(p)];
  }
  m.precision.assign(k, 0.0);
  m.recall.assign(k, 0.0);
  m.f1.assign(k, 0.0);
  m.support.assign(k, 0);
  std::size_t trace = 0;
  std::size_t present = 0;
  double f1_sum = 0.0, f1_weighted = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0;
    for (std::size_t r = 0; r < k; ++r) {
      m.support[c] += m.confusion[c * k + r];
      predicted += m.confusion[r * k + c];
    }
    const std::size_t tp = m.confusion[c * k + c];
    trace += tp;
    m.precision[c] = ratio(tp, predicted);
    m.recall[c] = ratio(tp, m.support[c]);
    const double pr = m.precision[c] + m.recall[c];
    m.f1[c] = pr > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
    if (m.support[c] == 0) {
      m.warnings.push_back("class " + std::to_string(c) +
                           " has no support and is excluded from macro F1");
      continue;
    }
    ++present;
    f1_sum += m.f1[c];
    f1_weighted += m.f1[c] * static_cast<double>(m.support[c]);
  }
  m.accuracy = ratio(trace, m.n_samples);
  m.macro_f1 = present ? f1_sum / static_cast<double>(present) : 0.0;
  m.weighted_f1 = f1_weighted / static_cast<double>(m.n_samples);
  return m;
}

void write_metrics_csv(const MetricsReport& m, const std::vector<std::string>& class_names,
                       const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "class,precision,recall,f1,support\n";
  for (int c = 0; c < m.num_classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    out << class_label(class_names, c) << ',' << m.precision[i] << ',' << m.recall[i] << ','
        << m.f1[i] << ',' << m.support[i] << '\n';
  }
  out << "accuracy,,,," << m.accuracy << '\n'
      << "macro_f1,,,," << m.macro_f1 << '\n'
      << "weighted_f1,,,," << m.weighted_f1 << '\n'
      << "n_samples,,,," << m.n_samples << '\n';
}

void write_confusion_csv(const MetricsReport& m, const std::vector<std::string>& class_names,
                         const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "truth\\pred";
  for (int c = 0; c < m.num_classes; ++c) out << ',' << class_label(class_names, c);
  out << '\n';
  for (int r = 0; r < m.num_classes; ++r) {
    out << class_label(class_names, r);
    for (int c = 0; c < m.num_classes; ++c) out << ',' << m.confusion_at(r, c);
    out << '\n';
  }
}

std::vector<int> predict_classes(const gbdt::BoostedModel& model,
                                 std::span<const double> features, std::size_t n_rows) {
  std::vector<int> out(n_rows);
  const std::size_t nf = model.num_features;
  if (features.size() != n_rows * nf) throw DataError("feature matrix has the wrong shape");
  for (std::size_t r = 0; r < n_rows; ++r) {
    out[r] = model.predict_class(features.subspan(r * nf, nf));
  }
  return out;
}

AblationSpec AblationSpec::default_groups() {
  AblationSpec spec;
  FeatureGroup p{"P", {}}, q{"Q", {}}, f{"f", {}}, v{"V", {}}, i{"I", {}};
  for (int d = 1; d <= data::kNumDG; ++d) {
    p.columns.push_back("P_DG" + std::to_string(d));
    q.columns.push_back("Q_DG" + std::to_string(d));
    f.columns.push_back("f_DG" + std::to_string(d));
  }
  for (int b = 1; b <= data::kNumBus; ++b) {
    v.columns.push_back("V" + std::to_string(b));
    i.columns.push_back("I" + std::to_string(b));
  }
  spec.groups = {p, q, f, v, i};
  return spec;
}

namespace {

double fit_and_score(const data::SampleTable& train, const data::SampleTable& valid,
                     const data::SampleTable& test, const gbdt::GbdtParams& params) {
  const auto tr = data::to_labeled_data(train);
  const auto va = data::to_labeled_data(valid);
  const auto te = data::to_labeled_data(test);
  const bool binary = params.objective == gbdt::Objective::Binary;
  const auto& tr_y = binary ? tr.label_bin : tr.label_multi;
  const auto& va_y = binary ? va.label_bin : va.label_multi;
  const auto& te_y = binary ? te.label_bin : te.label_multi;
  gbdt::TrainOptions opts;
  opts.feature_names = tr.feature_names;
  const auto model = gbdt::train(params, tr.features, tr.n_rows, tr.n_features, tr_y,
                                 gbdt::ValidSet{va.features, va.n_rows, va_y}, opts);
  const auto pred = predict_classes(model, te.features, te.n_rows);
  return compute_metrics(pred, te_y, model.num_classes()).macro_f1;
}

data::SampleTable drop_columns(const data::SampleTable& t, const std::set<std::string>& drop) {
  std::vector<std::string> keep;
  for (const auto& c : t.columns()) {
    if (!drop.contains(c)) keep.push_back(c);
  }
  return t.select_columns(keep);
}

}  // namespace

std::vector<AblationRow> run_ablation(const data::SampleTable& train,
                                      const data::SampleTable& valid,
                                      const data::SampleTable& test,
                                      const gbdt::GbdtParams& params, const AblationSpec& spec) {
  std::set<std::string> seen;
  for (const auto& g : spec.groups) {
    if (g.columns.empty()) throw UsageError("ablation group '" + g.name + "' is empty");
    for (const auto& c : g.columns) {
      if (c == "time" || c == "label_bin" || c == "label_multi" || !train.has_col(c)) {
        throw DataError("ablation group '" + g.name + "' references unknown feature '" + c +
                        "'");
      }
      if (!seen.insert(c).second) {
        throw UsageError("ablation groups overlap on column '" + c + "'");
      }
    }
  }
  std::vector<AblationRow> rows;
  const double base = fit_and_score(train, valid, test, params);
  rows.push_back({"baseline", base, 0.0});
  for (const auto& g : spec.groups) {
    const std::set<std::string> drop(g.columns.begin(), g.columns.end());
    const double f1 = fit_and_score(drop_columns(train, drop), drop_columns(valid, drop),
                                    drop_columns(test, drop), params);
    rows.push_back({g.name, f1, base - f1});
  }
  return rows;
}

void write_ablation_csv(std::span<const AblationRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "group_removed,macro_f1,drop,drop_pct\n";
  for (const auto& r : rows) {
    out << r.group << ',' << r.macro_f1 << ',' << r.drop << ',' << 100.0 * r.drop << '\n';
  }
}

void LatencyReport::write(std::ostream& out) const {
  out << "model=" << model_id << '\n'
      << "batch=" << batch << '\n'
      << "repetitions=" << repetitions << '\n'
      << "warmup_discarded=" << warmup << '\n'
      << "threads=" << threads << '\n'
      << "median_ms_per_" << batch << "=" << median_ms_per_batch << '\n'
      << "us_per_sample=" << us_per_sample << '\n'
      << "rep_ms=";
  for (std::size_t i = 0; i < rep_ms.size(); ++i) out << (i ? "," : "") << rep_ms[i];
  out << '\n';
}

LatencyReport bench_latency(const gbdt::BoostedModel& model, std::span<const double> features,
                            std::size_t n_rows, std::string model_id, std::size_t batch,
                            int repetitions, int warmup) {
  if (repetitions - warmup < 10 || warmup < 0) {
    throw UsageError("latency benchmark needs at least 10 timed repetitions");
  }
  if (batch == 0 || n_rows < batch) {
    throw DataError("latency benchmark needs " + std::to_string(batch) + " rows, table has " +
                    std::to_string(n_rows));
  }
  const std::size_t nf = model.num_features;
  if (features.size() < batch * nf) throw DataError("feature matrix has the wrong shape");
  LatencyReport rep;
  rep.model_id = std::move(model_id);
  rep.batch = batch;
  rep.repetitions = repetitions;
  rep.warmup = warmup;
  int sink = 0;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < batch; ++i) {
      sink += model.predict_class(features.subspan(i * nf, nf));
    }
    const auto t1 = std::chrono::steady_clock::now();
    rep.rep_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  // Keeps the prediction loop observable.
  if (sink < 0) rep.threads = 0;
  std::vector<double> warm(rep.rep_ms.begin() + warmup, rep.rep_ms.end());
  std::sort(warm.begin(), warm.end());
  const std::size_t n = warm.size();
  rep.median_ms_per_batch = n % 2 ? warm[n / 2] : 0.5 * (warm[n / 2 - 1] + warm[n / 2]);
  rep.us_per_sample = 1000.0 * rep.median_ms_per_batch / static_cast<double>(batch);
  return rep;
}

std::uintmax_t model_size(const std::filesystem::path& path) {
  std::error_code ec;
  const auto n = std::filesystem::file_size(path, ec);
  if (ec) throw DataError("model file '" + path.string() + "' not found");
  return n;
}

std::vector<DemoRow> realtime_demo(const gbdt::BoostedModel& model,
                                   const data::SampleTable& table, std::size_t n,
                                   std::uint64_t seed) {
  if (n > table.n_rows()) {
    throw DataError("demo asks for " + std::to_string(n) + " rows, table has " +
                    std::to_string(table.n_rows()));
  }
  const bool binary = model.params.objective == gbdt::Objective::Binary;
  const std::size_t label_col = table.col(binary ? "label_bin" : "label_multi");
  const std::size_t time_col = table.col("time");
  std::vector<std::size_t> feat_cols;
  for (const auto& name : model.feature_names) feat_cols.push_back(table.col(name));
  if (feat_cols.size() != model.num_features) {
    throw DataError("model does not list its feature names");
  }
  // Partial Fisher-Yates: n distinct rows.
  std::vector<std::size_t> idx(table.n_rows());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + hash_combine(seed, i) % (idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<DemoRow> out;
  std::vector<double> row(feat_cols.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = idx[i];
    for (std::size_t f = 0; f < feat_cols.size(); ++f) row[f] = table.at(r, feat_cols[f]);
    const auto proba = model.predict_proba(row);
    const auto best = std::max_element(proba.begin(), proba.end());
    out.push_back({r, table.at(r, time_col), static_cast<int>(best - proba.begin()),
                   static_cast<int>(table.at(r, label_col)), *best});
  }
  return out;
}

TrajectoryReport kd_trajectory_report(const gbdt::BoostedModel& teacher,
                                      const gbdt::BoostedModel& student,
                                      const data::SampleTable& table, std::size_t begin,
                                      std::size_t length) {
  if (length == 0 || begin >= table.n_rows()) throw DataError("trajectory window is empty");
  const std::size_t end = std::min(table.n_rows(), begin + length);
  const auto view = table.select_columns(teacher.feature_names);
  const std::size_t label_col = table.col("label_multi");
  const std::size_t time_col = table.col("time");
  TrajectoryReport rep;
  std::size_t agree = 0;
  for (std::size_t r = begin; r < end; ++r) {
    const auto row = view.row(r);
    TrajectoryPoint p{table.at(r, time_col), static_cast<int>(table.at(r, label_col)),
                      teacher.predict_class(row), student.predict_class(row)};
    agree += p.teacher == p.student;
    rep.points.push_back(p);
  }
  rep.agreement_pct = 100.0 * static_cast<double>(agree) / static_cast<double>(end - begin);
  return rep;
}

void write_trajectory_csv(const TrajectoryReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "time,truth,teacher,student\n";
  for (const auto& p : r.points) {
    out << p.time << ',' << p.truth << ',' << p.teacher << ',' << p.student << '\n';
  }
}

}  // namespace mgids::eval
