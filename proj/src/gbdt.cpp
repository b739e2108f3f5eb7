#include "mgids/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mgids/errors.hpp"
#include "mgids/kernels.hpp"
#include "mgids/rng.hpp"

namespace mgids::gbdt {

void GbdtParams::validate() const {
  if (objective == Objective::Multiclass && (num_class < 2 || num_class > 64)) {
    throw UsageError("multiclass objective needs 2..64 classes");
  }
  if (num_leaves < 2) throw UsageError("num_leaves must be >= 2");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0) ||
      !(bagging_fraction > 0.0 && bagging_fraction <= 1.0)) {
    throw UsageError("feature_fraction and bagging_fraction must lie in (0, 1]");
  }
  if (max_bins < 2 || max_bins > 255) throw UsageError("max_bins must lie in [2, 255]");
  if (num_iterations < 0 || bagging_freq < 0 || early_stopping_rounds < 0) {
    throw UsageError("iteration counts must be >= 0");
  }
  if (lambda_l2 < 0.0) throw UsageError("lambda_l2 must be >= 0");
  if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
}

GbdtParams GbdtParams::binary_teacher() {
  GbdtParams p;
  p.objective = Objective::Binary;
  p.num_class = 1;
  return p;
}

GbdtParams GbdtParams::multiclass_teacher() { return GbdtParams{}; }

GbdtParams GbdtParams::student() {
  GbdtParams p;
  p.num_leaves = 15;
  p.learning_rate = 0.10;
  p.feature_fraction = 0.8;
  p.bagging_fraction = 0.8;
  p.num_iterations = 50;
  return p;
}

// ---------------------------------------------------------------------------

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GradHess binary_grad_hess(double y, double logit) {
  const double p = sigmoid(logit);
  return {p - y, p * (1.0 - p)};
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - mx);
    sum += out[k];
  }
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] /= sum;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  softmax(logits, out);
  return out;
}

void softmax_grad_hess(std::span<const double> target, std::span<const double> logits,
                       std::span<double> g, std::span<double> h) {
  std::vector<double> p = softmax(logits);
  for (std::size_t k = 0; k < p.size(); ++k) {
    g[k] = p[k] - target[k];
    h[k] = p[k] * (1.0 - p[k]);
  }
}

// ---------------------------------------------------------------------------

std::uint8_t FeatureBins::bin(double x) const {
  return static_cast<std::uint8_t>(std::lower_bound(upper.begin(), upper.end(), x) - upper.begin());
}

FeatureBins build_feature_bins(std::span<const double> values, int max_bins) {
  if (max_bins < 2) throw UsageError("max_bins must be >= 2");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct;
  std::vector<std::size_t> counts;
  for (double v : sorted) {
    if (distinct.empty() || v != distinct.back()) {
      distinct.push_back(v);
      counts.push_back(1);
    } else {
      ++counts.back();
    }
  }
  auto boundary = [](double a, double b) {
    const double m = std::midpoint(a, b);
    return m < b ? m : a;
  };
  FeatureBins fb;
  if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
      fb.upper.push_back(boundary(distinct[i], distinct[i + 1]));
    }
    return fb;
  }
  // Greedy quantiles: close a bin once the running count reaches the next
  // multiple of n / max_bins.
  const double per_bin = static_cast<double>(sorted.size()) / max_bins;
  std::size_t cum = 0;
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    cum += counts[i];
    const double target = per_bin * static_cast<double>(fb.upper.size() + 1);
    if (static_cast<double>(cum) >= target - 1e-9) {
      fb.upper.push_back(boundary(distinct[i], distinct[i + 1]));
      if (fb.upper.size() + 1 == static_cast<std::size_t>(max_bins)) break;
    }
  }
  return fb;
}

std::vector<FeatureBins> build_bins(std::span<const double> features, std::size_t n_rows,
                                    std::size_t n_features, int max_bins) {
  std::vector<FeatureBins> out(n_features);
  std::vector<double> col(n_rows);
  for (std::size_t f = 0; f < n_features; ++f) {
    for (std::size_t r = 0; r < n_rows; ++r) col[r] = features[r * n_features + f];
    out[f] = build_feature_bins(col, max_bins);
  }
  return out;
}

BinnedMatrix bin_matrix(std::span<const double> features, std::size_t n_rows,
                        std::size_t n_features, std::span<const FeatureBins> bins) {
  BinnedMatrix m;
  m.n_rows = n_rows;
  m.n_features = n_features;
  m.bins.resize(n_rows * n_features);
  for (std::size_t f = 0; f < n_features; ++f) {
    for (std::size_t r = 0; r < n_rows; ++r) {
      m.bins[f * n_rows + r] = bins[f].bin(features[r * n_features + f]);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

Histogram::Histogram(std::size_t n_features, int max_bins)
    : n_features_(n_features),
      stride_(static_cast<std::size_t>(max_bins)),
      data_(n_features * static_cast<std::size_t>(max_bins)) {}

void Histogram::clear() { std::fill(data_.begin(), data_.end(), HistEntry{}); }

void Histogram::subtract_from(const Histogram& parent, const Histogram& other) {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i].sum_g = parent.data_[i].sum_g - other.data_[i].sum_g;
    data_[i].sum_h = parent.data_[i].sum_h - other.data_[i].sum_h;
    data_[i].count = parent.data_[i].count - other.data_[i].count;
  }
}

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr, h = hl + hr;
  return gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda);
}

SplitInfo best_split(const Histogram& hist, std::span<const int> bins_per_feature,
                     std::span<const char> feature_mask, double lambda, int min_samples_leaf) {
  SplitInfo best;
  const auto min_leaf = static_cast<std::uint32_t>(min_samples_leaf);
  for (std::size_t f = 0; f < hist.n_features(); ++f) {
    if (!feature_mask.empty() && !feature_mask[f]) continue;
    const int nb = bins_per_feature[f];
    if (nb < 2) continue;
    const auto entries = hist.feature(f);
    double tg = 0.0, th = 0.0;
    std::uint32_t tc = 0;
    for (int b = 0; b < nb; ++b) {
      tg += entries[static_cast<std::size_t>(b)].sum_g;
      th += entries[static_cast<std::size_t>(b)].sum_h;
      tc += entries[static_cast<std::size_t>(b)].count;
    }
    double gl = 0.0, hl = 0.0;
    std::uint32_t cl = 0;
    for (int b = 0; b + 1 < nb; ++b) {
      const auto& e = entries[static_cast<std::size_t>(b)];
      gl += e.sum_g;
      hl += e.sum_h;
      cl += e.count;
      if (cl < min_leaf) continue;
      const std::uint32_t cr = tc - cl;
      if (cr < min_leaf) break;
      const double gr = tg - gl, hr = th - hl;
      if (!(hl + lambda > 0.0) || !(hr + lambda > 0.0)) continue;
      const double gain = split_gain(gl, hl, gr, hr, lambda);
      if (gain > best.gain) {
        best = {static_cast<int>(f), b, gain, gl, hl, gr, hr, cl, cr};
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

int Tree::num_leaves() const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

void BoostedModel::predict_raw(std::span<const double> row, std::span<double> out) const {
  if (row.size() != num_features) {
    throw DataError("row has " + std::to_string(row.size()) + " features, model expects " +
                    std::to_string(num_features));
  }
  const auto k = static_cast<std::size_t>(num_outputs());
  for (std::size_t c = 0; c < k; ++c) out[c] = base_score[c];
  for (std::size_t t = 0; t < trees.size(); ++t) out[t % k] += trees[t].predict(row);
}

std::vector<double> BoostedModel::predict_proba(std::span<const double> row) const {
  std::vector<double> raw(static_cast<std::size_t>(num_outputs()));
  predict_raw(row, raw);
  if (params.objective == Objective::Binary) {
    const double p = sigmoid(raw[0]);
    return {1.0 - p, p};
  }
  return softmax(raw);
}

int BoostedModel::predict_class(std::span<const double> row) const {
  std::vector<double> raw(static_cast<std::size_t>(num_outputs()));
  predict_raw(row, raw);
  if (params.objective == Objective::Binary) return raw[0] > 0.0 ? 1 : 0;
  return static_cast<int>(std::max_element(raw.begin(), raw.end()) - raw.begin());
}

BoostedModel empty_model(const GbdtParams& params, std::size_t num_features) {
  BoostedModel m;
  m.params = params;
  m.num_features = num_features;
  m.base_score.assign(static_cast<std::size_t>(params.trees_per_iteration()), 0.0);
  return m;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Leaf {
  std::size_t begin = 0;
  std::size_t end = 0;
  Histogram hist;
  SplitInfo split;
  double sum_g = 0.0;
  double sum_h = 0.0;
  int node = 0;
};

struct TreeGrower {
  const GbdtParams& params;
  const BinnedMatrix& binned;
  const std::vector<FeatureBins>& bins;
  const std::vector<int>& n_bins;

  SplitInfo find_split(const Leaf& leaf, std::span<const char> mask) const {
    if (leaf.end - leaf.begin < 2 * static_cast<std::size_t>(params.min_samples_leaf)) return {};
    return best_split(leaf.hist, n_bins, mask, params.lambda_l2, params.min_samples_leaf);
  }

  Tree grow(std::vector<std::uint32_t>& idx, std::span<const double> g, std::span<const double> h,
            std::span<const char> mask) const {
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Leaf> leaves;
    {
      Leaf root;
      root.begin = 0;
      root.end = idx.size();
      for (std::uint32_t r : idx) {
        root.sum_g += g[r];
        root.sum_h += h[r];
      }
      root.hist = Histogram(binned.n_features, params.max_bins);
      kernels::build_histogram(binned, idx, g, h, mask, root.hist);
      root.split = find_split(root, mask);
      leaves.push_back(std::move(root));
    }
    std::vector<std::uint32_t> scratch;
    while (static_cast<int>(leaves.size()) < params.num_leaves) {
      std::size_t pick = leaves.size();
      double best_gain = 0.0;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].split.valid() && leaves[i].split.gain > best_gain) {
          best_gain = leaves[i].split.gain;
          pick = i;
        }
      }
      if (pick == leaves.size()) break;

      Leaf& parent = leaves[pick];
      const SplitInfo s = parent.split;
      const std::uint8_t* col = binned.column(static_cast<std::size_t>(s.feature));
      // Stable partition: left rows (bin <= s.bin) first, both halves in ascending order.
      scratch.clear();
      std::size_t w = parent.begin;
      for (std::size_t i = parent.begin; i < parent.end; ++i) {
        const std::uint32_t r = idx[i];
        if (col[r] <= s.bin) {
          idx[w++] = r;
        } else {
          scratch.push_back(r);
        }
      }
      std::copy(scratch.begin(), scratch.end(), idx.begin() + static_cast<std::ptrdiff_t>(w));

      Leaf left, right;
      left.begin = parent.begin;
      left.end = w;
      right.begin = w;
      right.end = parent.end;
      left.sum_g = s.left_g;
      left.sum_h = s.left_h;
      right.sum_g = s.right_g;
      right.sum_h = s.right_h;

      const bool left_smaller = (left.end - left.begin) <= (right.end - right.begin);
      Leaf& small = left_smaller ? left : right;
      Leaf& large = left_smaller ? right : left;
      small.hist = Histogram(binned.n_features, params.max_bins);
      kernels::build_histogram(
          binned,
          std::span<const std::uint32_t>(idx.data() + small.begin, small.end - small.begin), g, h,
          mask, small.hist);
      large.hist = std::move(parent.hist);
      large.hist.subtract_from(large.hist, small.hist);

      const int node = parent.node;
      auto& n = tree.nodes[static_cast<std::size_t>(node)];
      n.feature = s.feature;
      n.bin = s.bin;
      n.threshold = bins[static_cast<std::size_t>(s.feature)].threshold(s.bin);
      n.gain = s.gain;
      n.left = static_cast<int>(tree.nodes.size());
      n.right = n.left + 1;
      left.node = n.left;
      right.node = n.right;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();

      left.split = find_split(left, mask);
      right.split = find_split(right, mask);
      leaves[pick] = std::move(left);
      leaves.push_back(std::move(right));
    }
    for (const Leaf& leaf : leaves) {
      tree.nodes[static_cast<std::size_t>(leaf.node)].value =
          -leaf.sum_g / (leaf.sum_h + params.lambda_l2) * params.learning_rate;
    }
    return tree;
  }
};

double predict_binned(const Tree& tree, const BinnedMatrix& m, std::size_t r) {
  int i = 0;
  while (tree.nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = tree.nodes[static_cast<std::size_t>(i)];
    i = m.column(static_cast<std::size_t>(n.feature))[r] <= n.bin ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(i)].value;
}

double log_sum_exp(std::span<const double> s) {
  const double mx = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (double v : s) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

// Cross-entropy of targets under raw scores, averaged over rows.
double mean_target_loss(const GbdtParams& params, std::span<const double> scores,
                        std::span<const double> targets, std::size_t n_rows) {
  double total = 0.0;
  if (params.objective == Objective::Binary) {
    for (std::size_t r = 0; r < n_rows; ++r) {
      const double s = scores[r];
      total += std::log1p(std::exp(-std::abs(s))) + std::max(s, 0.0) - targets[r] * s;
    }
  } else {
    const auto k = static_cast<std::size_t>(params.num_class);
    for (std::size_t r = 0; r < n_rows; ++r) {
      auto row = scores.subspan(r * k, k);
      const double lse = log_sum_exp(row);
      for (std::size_t c = 0; c < k; ++c) {
        const double q = targets[r * k + c];
        if (q != 0.0) total += q * (lse - row[c]);
      }
    }
  }
  return total / static_cast<double>(n_rows);
}

std::vector<char> sample_features(const GbdtParams& params, std::size_t n_features, int iteration,
                                  int cls) {
  std::vector<char> mask(n_features, 1);
  if (params.feature_fraction >= 1.0) return mask;
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.feature_fraction * n_features)));
  std::vector<std::size_t> order(n_features);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j =
        i + hash_combine(params.seed, 0xFEA7, iteration, cls, i) % (n_features - i);
    std::swap(order[i], order[j]);
  }
  std::fill(mask.begin(), mask.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
  return mask;
}

std::vector<std::uint32_t> sample_rows(const GbdtParams& params, std::size_t n_rows, int round) {
  std::vector<std::uint32_t> rows;
  rows.reserve(n_rows);
  const bool bagging = params.bagging_freq > 0 && params.bagging_fraction < 1.0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (!bagging || unit_double(hash_combine(params.seed, 0xBA6, round, r)) < params.bagging_fraction) {
      rows.push_back(static_cast<std::uint32_t>(r));
    }
  }
  return rows;
}

}  // namespace

std::vector<double> hard_targets(const GbdtParams& params, std::span<const int> labels) {
  if (params.objective == Objective::Binary) {
    std::vector<double> t(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] != 0 && labels[r] != 1) throw DataError("binary labels must be 0 or 1");
      t[r] = labels[r];
    }
    return t;
  }
  const auto k = static_cast<std::size_t>(params.num_class);
  std::vector<double> t(labels.size() * k, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || labels[r] >= params.num_class) {
      throw DataError("label " + std::to_string(labels[r]) + " outside [0, num_class)");
    }
    t[r * k + static_cast<std::size_t>(labels[r])] = 1.0;
  }
  return t;
}

double mean_log_loss(const GbdtParams& params, std::span<const double> scores,
                     std::span<const int> labels) {
  const auto targets = hard_targets(params, labels);
  return mean_target_loss(params, scores, targets, labels.size());
}

BoostedModel train_on_targets(const GbdtParams& params, const TrainSet& train,
                              const std::optional<ValidSet>& valid, const TrainOptions& options,
                              std::vector<IterationLog>* log) {
  params.validate();
  const std::size_t n = train.n_rows;
  const std::size_t nf = train.n_features;
  const auto k = static_cast<std::size_t>(params.trees_per_iteration());
  if (n == 0) throw DataError("training set is empty");
  if (train.features.size() != n * nf || train.targets.size() != n * k) {
    throw DataError("training features or targets have the wrong size");
  }
  if (n > std::numeric_limits<std::uint32_t>::max()) throw DataError("training set too large");

  BoostedModel model;
  model.params = params;
  model.num_features = nf;
  model.feature_names = options.feature_names;

  // Base scores: prior log-odds (binary) or log priors (multiclass).
  model.base_score.assign(k, 0.0);
  {
    std::vector<double> prior(k, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < k; ++c) prior[c] += train.targets[r * k + c];
    }
    constexpr double kFloor = 1e-15;
    if (params.objective == Objective::Binary) {
      const double p = std::clamp(prior[0] / static_cast<double>(n), kFloor, 1.0 - kFloor);
      model.base_score[0] = std::log(p / (1.0 - p));
    } else {
      int present = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double p = prior[c] / static_cast<double>(n);
        present += p > 0.0;
        model.base_score[c] = std::log(std::max(p, kFloor));
      }
      if (present < 2) throw DataError("multiclass training data holds a single class");
    }
  }

  const auto bins = build_bins(train.features, n, nf, params.max_bins);
  std::vector<int> n_bins(nf);
  for (std::size_t f = 0; f < nf; ++f) n_bins[f] = bins[f].n_bins();
  const BinnedMatrix binned = bin_matrix(train.features, n, nf, bins);
  const TreeGrower grower{params, binned, bins, n_bins};

  std::vector<double> scores(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) scores[r * k + c] = model.base_score[c];
  }
  std::vector<double> valid_scores;
  std::vector<double> valid_targets;
  if (valid) {
    if (valid->features.size() != valid->n_rows * nf || valid->labels.size() != valid->n_rows) {
      throw DataError("validation features or labels have the wrong size");
    }
    valid_scores.resize(valid->n_rows * k);
    for (std::size_t r = 0; r < valid->n_rows; ++r) {
      for (std::size_t c = 0; c < k; ++c) valid_scores[r * k + c] = model.base_score[c];
    }
    valid_targets = hard_targets(params, valid->labels);
  }

  std::vector<double> g(n * k), h(n * k);
  std::vector<std::uint32_t> bag, idx;
  double best_valid = std::numeric_limits<double>::infinity();
  int best_iter = 0;

  for (int it = 0; it < params.num_iterations; ++it) {
    if (it == 0 || (params.bagging_freq > 0 && it % params.bagging_freq == 0)) {
      bag = sample_rows(params, n, it);
    }
    kernels::compute_gradients(params, scores, train.targets, n, g, h);
    for (std::size_t c = 0; c < k; ++c) {
      const auto mask = sample_features(params, nf, it, static_cast<int>(c));
      idx = bag;
      Tree tree = grower.grow(idx, std::span<const double>(g).subspan(c * n, n),
                              std::span<const double>(h).subspan(c * n, n), mask);
      for (std::size_t r = 0; r < n; ++r) scores[r * k + c] += predict_binned(tree, binned, r);
      if (valid) {
        for (std::size_t r = 0; r < valid->n_rows; ++r) {
          valid_scores[r * k + c] += tree.predict(valid->features.subspan(r * nf, nf));
        }
      }
      model.trees.push_back(std::move(tree));
    }
    model.iterations_run = it + 1;

    IterationLog entry;
    entry.iteration = it + 1;
    entry.train_loss = mean_target_loss(params, scores, train.targets, n);
    if (valid) entry.valid_loss = mean_target_loss(params, valid_scores, valid_targets, valid->n_rows);
    if (log) log->push_back(entry);
    if (options.on_iteration) options.on_iteration(entry);

    if (valid) {
      if (*entry.valid_loss < best_valid) {
        best_valid = *entry.valid_loss;
        best_iter = it + 1;
      } else if (params.early_stopping_rounds > 0 &&
                 it + 1 - best_iter >= params.early_stopping_rounds) {
        break;
      }
    }
  }
  if (valid && best_iter > 0) {
    model.trees.resize(static_cast<std::size_t>(best_iter) * k);
    model.best_iteration = best_iter;
  } else {
    model.best_iteration = model.iterations_run;
  }
  return model;
}

BoostedModel train(const GbdtParams& params, std::span<const double> features,
                   std::size_t n_rows, std::size_t n_features, std::span<const int> labels,
                   const std::optional<ValidSet>& valid, const TrainOptions& options,
                   std::vector<IterationLog>* log) {
  if (labels.size() != n_rows) throw DataError("label count does not match row count");
  const auto targets = hard_targets(params, labels);
  return train_on_targets(params, {features, n_rows, n_features, targets}, valid, options, log);
}

std::vector<double> feature_importance_gain(const BoostedModel& model) {
  std::vector<double> imp(model.num_features, 0.0);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) imp[static_cast<std::size_t>(node.feature)] += node.gain;
    }
  }
  return imp;
}

}  // namespace mgids::gbdt
