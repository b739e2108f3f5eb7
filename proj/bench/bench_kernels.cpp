// Serial reference vs OpenMP kernels on a desk-scale sized problem.

#include <benchmark/benchmark.h>

#include <random>

#include "mgids/dataset.hpp"
#include "mgids/gbdt.hpp"
#include "mgids/kernels.hpp"

namespace {

using namespace mgids::gbdt;

constexpr std::size_t kRows = 20000;
constexpr std::size_t kFeatures = 36;

struct Problem {
  std::vector<double> x;
  std::vector<int> y;
  BinnedMatrix binned;
  std::vector<double> g, h;
  std::vector<std::uint32_t> rows;
  BoostedModel model;

  Problem() {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    x.resize(kRows * kFeatures);
    for (double& v : x) v = nd(rng);
    for (std::size_t r = 0; r < kRows; ++r) y.push_back(static_cast<int>(rng() % 7));
    const auto bins = build_bins(x, kRows, kFeatures, 255);
    binned = bin_matrix(x, kRows, kFeatures, bins);
    g.resize(kRows);
    h.resize(kRows);
    for (std::size_t r = 0; r < kRows; ++r) g[r] = nd(rng), h[r] = 0.25;
    rows.resize(kRows);
    for (std::uint32_t r = 0; r < kRows; ++r) rows[r] = r;
    GbdtParams p;
    p.num_iterations = 10;
    model = train(p, x, kRows, kFeatures, y, std::nullopt);
  }
};

const Problem& problem() {
  static const Problem p;
  return p;
}

void BM_HistogramSerial(benchmark::State& state) {
  const auto& p = problem();
  Histogram hist(kFeatures, 255);
  for (auto _ : state) {
    kernels::build_histogram_serial(p.binned, p.rows, p.g, p.h, {}, hist);
    benchmark::DoNotOptimize(hist.feature(0).data());
  }
}

void BM_HistogramOpenMP(benchmark::State& state) {
  const auto& p = problem();
  Histogram hist(kFeatures, 255);
  for (auto _ : state) {
    kernels::build_histogram(p.binned, p.rows, p.g, p.h, {}, hist);
    benchmark::DoNotOptimize(hist.feature(0).data());
  }
}

template <bool Parallel>
void BM_Gradients(benchmark::State& state) {
  const auto& p = problem();
  GbdtParams params;
  const auto targets = hard_targets(params, p.y);
  std::vector<double> scores(kRows * 7, 0.1), g(kRows * 7), h(kRows * 7);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::compute_gradients(params, scores, targets, kRows, g, h);
    } else {
      kernels::compute_gradients_serial(params, scores, targets, kRows, g, h);
    }
    benchmark::DoNotOptimize(g.data());
  }
}

template <bool Parallel>
void BM_PredictBatch(benchmark::State& state) {
  const auto& p = problem();
  std::vector<double> out(kRows * 7);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::predict_raw_batch(p.model, p.x, kRows, out);
    } else {
      kernels::predict_raw_batch_serial(p.model, p.x, kRows, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Chunked>
void BM_NormStats(benchmark::State& state) {
  mgids::data::SampleTable t(mgids::data::labeled_header());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  std::vector<double> row(t.n_cols(), 0.0);
  for (std::size_t r = 0; r < kRows; ++r) {
    for (std::size_t c = 1; c + 2 < row.size(); ++c) row[c] = nd(rng);
    t.append_row(row);
  }
  for (auto _ : state) {
    auto s = Chunked ? mgids::data::fit_norm_stats(t, 4096) : mgids::data::fit_norm_stats_serial(t);
    benchmark::DoNotOptimize(s.mean.data());
  }
}

}  // namespace

BENCHMARK(BM_HistogramSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_HistogramOpenMP)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Gradients<false>)->Name("BM_GradientsSerial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Gradients<true>)->Name("BM_GradientsOpenMP")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PredictBatch<false>)->Name("BM_PredictBatchSerial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictBatch<true>)->Name("BM_PredictBatchOpenMP")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormStats<false>)->Name("BM_NormStatsSerial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormStats<true>)->Name("BM_NormStatsChunked")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
