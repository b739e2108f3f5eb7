#include "mgids/kernels.hpp"

#include <cstddef>

namespace mgids::gbdt::kernels {

namespace {

inline void accumulate_feature(const std::uint8_t* col, std::span<const std::uint32_t> rows,
                               const double* g, const double* h, std::span<HistEntry> hist) {
  for (auto& e : hist) e = {};
  for (std::uint32_t r : rows) {
    HistEntry& e = hist[col[r]];
    e.sum_g += g[r];
    e.sum_h += h[r];
    ++e.count;
  }
}

inline bool selected(std::span<const char> mask, std::size_t f) {
  return mask.empty() || mask[f] != 0;
}

}  // namespace

void build_histogram_serial(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                            std::span<const double> g, std::span<const double> h,
                            std::span<const char> feature_mask, Histogram& out) {
  for (std::size_t f = 0; f < m.n_features; ++f) {
    if (selected(feature_mask, f)) {
      accumulate_feature(m.column(f), rows, g.data(), h.data(), out.feature(f));
    } else {
      for (auto& e : out.feature(f)) e = {};
    }
  }
}

void build_histogram(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                     std::span<const double> g, std::span<const double> h,
                     std::span<const char> feature_mask, Histogram& out) {
  const auto n_features = static_cast<std::ptrdiff_t>(m.n_features);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t fi = 0; fi < n_features; ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    if (selected(feature_mask, f)) {
      accumulate_feature(m.column(f), rows, g.data(), h.data(), out.feature(f));
    } else {
      for (auto& e : out.feature(f)) e = {};
    }
  }
}

namespace {

inline void gradients_for_row(const GbdtParams& params, const double* scores,
                              const double* targets, std::size_t n_rows, std::size_t r,
                              double* g, double* h) {
  if (params.objective == Objective::Binary) {
    const GradHess gh = binary_grad_hess(targets[r], scores[r]);
    g[r] = gh.g;
    h[r] = gh.h;
    return;
  }
  const auto k = static_cast<std::size_t>(params.num_class);
  double p[64];
  std::span<const double> logits(scores + r * k, k);
  softmax(logits, std::span<double>(p, k));
  for (std::size_t c = 0; c < k; ++c) {
    g[c * n_rows + r] = p[c] - targets[r * k + c];
    h[c * n_rows + r] = p[c] * (1.0 - p[c]);
  }
}

}  // namespace

void compute_gradients_serial(const GbdtParams& params, std::span<const double> scores,
                              std::span<const double> targets, std::size_t n_rows,
                              std::span<double> g, std::span<double> h) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    gradients_for_row(params, scores.data(), targets.data(), n_rows, r, g.data(), h.data());
  }
}

void compute_gradients(const GbdtParams& params, std::span<const double> scores,
                       std::span<const double> targets, std::size_t n_rows,
                       std::span<double> g, std::span<double> h) {
  const auto n = static_cast<std::ptrdiff_t>(n_rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    gradients_for_row(params, scores.data(), targets.data(), n_rows, static_cast<std::size_t>(r),
                      g.data(), h.data());
  }
}

void predict_raw_batch_serial(const BoostedModel& model, std::span<const double> features,
                              std::size_t n_rows, std::span<double> out) {
  const std::size_t nf = model.num_features;
  const auto k = static_cast<std::size_t>(model.num_outputs());
  for (std::size_t r = 0; r < n_rows; ++r) {
    model.predict_raw(features.subspan(r * nf, nf), out.subspan(r * k, k));
  }
}

void predict_raw_batch(const BoostedModel& model, std::span<const double> features,
                       std::size_t n_rows, std::span<double> out) {
  const std::size_t nf = model.num_features;
  const auto k = static_cast<std::size_t>(model.num_outputs());
  const auto n = static_cast<std::ptrdiff_t>(n_rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ri = 0; ri < n; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    model.predict_raw(features.subspan(r * nf, nf), out.subspan(r * k, k));
  }
}

}  // namespace mgids::gbdt::kernels
