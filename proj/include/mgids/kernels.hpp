#pragma once

// Data-parallel inner loops of the learner. Each kernel has an OpenMP variant
// and a serial reference with identical arithmetic order per output element,
// so results are bitwise independent of the thread count.

#include <cstdint>
#include <span>

#include "mgids/gbdt.hpp"

namespace mgids::gbdt::kernels {

/// Accumulates (g, h, 1) of the listed rows into per-feature histograms.
/// Features with feature_mask[f] == 0 are left cleared; an empty mask means all.
void build_histogram_serial(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                            std::span<const double> g, std::span<const double> h,
                            std::span<const char> feature_mask, Histogram& out);

/// Parallel over features; each feature still sums its rows in list order.
void build_histogram(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                     std::span<const double> g, std::span<const double> h,
                     std::span<const char> feature_mask, Histogram& out);

/// Per-row gradients for the model's objective. scores and targets hold
/// n_outputs values per row; g and h are output-major: g[k * n_rows + r].
void compute_gradients_serial(const GbdtParams& params, std::span<const double> scores,
                              std::span<const double> targets, std::size_t n_rows,
                              std::span<double> g, std::span<double> h);

void compute_gradients(const GbdtParams& params, std::span<const double> scores,
                       std::span<const double> targets, std::size_t n_rows,
                       std::span<double> g, std::span<double> h);

/// Raw scores of a row-major batch; out holds num_outputs() values per row.
void predict_raw_batch_serial(const BoostedModel& model, std::span<const double> features,
                              std::size_t n_rows, std::span<double> out);

/// Parallel over rows.
void predict_raw_batch(const BoostedModel& model, std::span<const double> features,
                       std::size_t n_rows, std::span<double> out);

}  // namespace mgids::gbdt::kernels
