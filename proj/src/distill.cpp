#include "mgids/distill.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mgids/errors.hpp"
#include "mgids/kernels.hpp"

namespace mgids::kd {

void KDConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || !(alpha + beta > 0.0)) {
    throw UsageError("KD weights need alpha, beta >= 0 and alpha + beta > 0");
  }
  if (!(temperature > 0.0)) throw UsageError("KD temperature must be > 0");
  student.validate();
}

std::vector<double> soften(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw UsageError("temperature must be > 0");
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& z : scaled) z /= temperature;
  return gbdt::softmax(scaled);
}

std::vector<double> kd_targets(std::span<const double> y_onehot,
                               std::span<const double> teacher_logits, const KDConfig& cfg) {
  if (y_onehot.size() != teacher_logits.size()) {
    throw DataError("kd_targets: label and teacher logit arity differ");
  }
  const double total = cfg.alpha + cfg.beta;
  std::vector<double> q(y_onehot.size());
  if (cfg.beta == 0.0) {
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = cfg.alpha * y_onehot[k] / total;
    return q;
  }
  const auto soft = soften(teacher_logits, cfg.temperature);
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = (cfg.alpha * y_onehot[k] + cfg.beta * soft[k]) / total;
  }
  return q;
}

std::vector<double> teacher_logits(const gbdt::BoostedModel& teacher,
                                   std::span<const double> features, std::size_t n_rows) {
  std::vector<double> out(n_rows * static_cast<std::size_t>(teacher.num_outputs()));
  gbdt::kernels::predict_raw_batch(teacher, features, n_rows, out);
  return out;
}

std::uint64_t content_hash(std::span<const char> bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> cached_teacher_logits(const gbdt::BoostedModel& teacher,
                                          std::span<const double> features, std::size_t n_rows,
                                          const std::filesystem::path& cache_dir,
                                          std::uint64_t salt) {
  std::ostringstream model_text;
  gbdt::save(teacher, model_text);
  const std::string text = model_text.str();
  const std::uint64_t model_hash = content_hash(text, salt);
  const std::uint64_t data_hash = content_hash(
      {reinterpret_cast<const char*>(features.data()), features.size_bytes()}, salt);
  char name[80];
  std::snprintf(name, sizeof name, "teacher_logits_%016llx_%016llx.bin",
                static_cast<unsigned long long>(model_hash),
                static_cast<unsigned long long>(data_hash));
  const auto path = cache_dir / name;
  const std::size_t expected = n_rows * static_cast<std::size_t>(teacher.num_outputs());
  if (std::filesystem::exists(path) &&
      std::filesystem::file_size(path) == expected * sizeof(double)) {
    std::vector<double> logits(expected);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(logits.data()),
            static_cast<std::streamsize>(expected * sizeof(double)));
    if (in) return logits;
  }
  auto logits = teacher_logits(teacher, features, n_rows);
  std::filesystem::create_directories(cache_dir);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(logits.data()),
            static_cast<std::streamsize>(logits.size() * sizeof(double)));
  return logits;
}

gbdt::BoostedModel distill(const gbdt::BoostedModel& teacher, std::span<const double> features,
                           std::size_t n_rows, std::size_t n_features,
                           std::span<const int> labels, std::span<const double> logits,
                           const std::optional<gbdt::ValidSet>& valid, const KDConfig& cfg,
                           const gbdt::TrainOptions& options,
                           std::vector<gbdt::IterationLog>* log) {
  cfg.validate();
  if (teacher.params.objective != gbdt::Objective::Multiclass) {
    throw UsageError("distillation needs a multiclass teacher");
  }
  if (cfg.student.objective != gbdt::Objective::Multiclass ||
      cfg.student.num_class != teacher.params.num_class) {
    throw UsageError("student and teacher class counts differ");
  }
  const auto k = static_cast<std::size_t>(teacher.params.num_class);
  if (logits.size() != n_rows * k || labels.size() != n_rows) {
    throw DataError("teacher logits or labels do not match the training rows");
  }
  const auto onehot = gbdt::hard_targets(cfg.student, labels);
  std::vector<double> targets(n_rows * k);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto q = kd_targets(std::span<const double>(onehot).subspan(r * k, k),
                              logits.subspan(r * k, k), cfg);
    std::copy(q.begin(), q.end(), targets.begin() + static_cast<std::ptrdiff_t>(r * k));
  }
  return gbdt::train_on_targets(cfg.student, {features, n_rows, n_features, targets}, valid,
                                options, log);
}

DistillReport make_report(const gbdt::BoostedModel& teacher, const gbdt::BoostedModel& student,
                          std::span<const double> features, std::size_t n_rows,
                          std::span<const int> labels) {
  DistillReport rep;
  std::ostringstream t, s;
  gbdt::save(teacher, t);
  gbdt::save(student, s);
  rep.teacher_size_bytes = t.str().size();
  rep.student_size_bytes = s.str().size();
  rep.size_reduction_pct =
      100.0 * (1.0 - static_cast<double>(rep.student_size_bytes) /
                         static_cast<double>(rep.teacher_size_bytes));
  const std::size_t nf = teacher.num_features;
  std::size_t agree = 0, correct_t = 0, correct_s = 0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    auto row = features.subspan(r * nf, nf);
    const int pt = teacher.predict_class(row);
    const int ps = student.predict_class(row);
    agree += pt == ps;
    correct_t += pt == labels[r];
    correct_s += ps == labels[r];
  }
  const double n = n_rows ? static_cast<double>(n_rows) : 1.0;
  rep.argmax_agreement_pct = 100.0 * static_cast<double>(agree) / n;
  rep.accuracy_teacher = static_cast<double>(correct_t) / n;
  rep.accuracy_student = static_cast<double>(correct_s) / n;
  return rep;
}

void DistillReport::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "teacher_size_bytes=" << teacher_size_bytes << '\n'
      << "student_size_bytes=" << student_size_bytes << '\n'
      << "size_reduction_pct=" << size_reduction_pct << '\n'
      << "argmax_agreement_pct=" << argmax_agreement_pct << '\n'
      << "accuracy_teacher=" << accuracy_teacher << '\n'
      << "accuracy_student=" << accuracy_student << '\n';
}

}  // namespace mgids::kd
