#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mgids::gbdt {

enum class Objective { Binary, Multiclass };

struct GbdtParams {
  Objective objective = Objective::Multiclass;
  int num_class = 7;
  int num_leaves = 63;
  double learning_rate = 0.05;
  double feature_fraction = 0.9;
  double bagging_fraction = 0.8;
  int bagging_freq = 5;
  int num_iterations = 200;
  int early_stopping_rounds = 20;  // 0 disables
  int max_bins = 255;
  double lambda_l2 = 1.0;
  int min_samples_leaf = 20;
  std::uint64_t seed = 3;

  /// Number of trees grown per boosting iteration.
  int trees_per_iteration() const { return objective == Objective::Binary ? 1 : num_class; }
  void validate() const;

  static GbdtParams binary_teacher();
  static GbdtParams multiclass_teacher();
  static GbdtParams student();
};

// ---------------------------------------------------------------------------
// Objectives

struct GradHess {
  double g;
  double h;
};

double sigmoid(double x);

/// Log-loss derivatives w.r.t. the logit: g = p - y, h = p (1 - p).
GradHess binary_grad_hess(double y, double logit);

/// Numerically stable softmax.
void softmax(std::span<const double> logits, std::span<double> out);
std::vector<double> softmax(std::span<const double> logits);

/// Cross-entropy derivatives against a target distribution (one-hot or soft):
/// g_k = p_k - y_k, h_k = p_k (1 - p_k).
void softmax_grad_hess(std::span<const double> target, std::span<const double> logits,
                       std::span<double> g, std::span<double> h);

// ---------------------------------------------------------------------------
// Binning

/// Quantile bin boundaries of one feature. Bin b holds values x with
/// upper[b-1] < x <= upper[b]; the last bin is unbounded above.
struct FeatureBins {
  std::vector<double> upper;

  int n_bins() const { return static_cast<int>(upper.size()) + 1; }
  std::uint8_t bin(double x) const;
  /// Real-valued split threshold for "bin <= b goes left".
  double threshold(int b) const { return upper[static_cast<std::size_t>(b)]; }
};

FeatureBins build_feature_bins(std::span<const double> values, int max_bins);

/// Per-feature bins for a row-major matrix.
std::vector<FeatureBins> build_bins(std::span<const double> features, std::size_t n_rows,
                                    std::size_t n_features, int max_bins);

/// Column-major bin indices: bins[f * n_rows + r].
struct BinnedMatrix {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<std::uint8_t> bins;

  const std::uint8_t* column(std::size_t f) const { return bins.data() + f * n_rows; }
};

BinnedMatrix bin_matrix(std::span<const double> features, std::size_t n_rows,
                        std::size_t n_features, std::span<const FeatureBins> bins);

// ---------------------------------------------------------------------------
// Histograms and split search

struct HistEntry {
  double sum_g = 0.0;
  double sum_h = 0.0;
  std::uint32_t count = 0;
};

/// (sum g, sum h, count) per (feature, bin), laid out feature-major with a
/// fixed stride of max_bins entries.
class Histogram {
 public:
  Histogram() = default;
  Histogram(std::size_t n_features, int max_bins);

  std::span<HistEntry> feature(std::size_t f) {
    return {data_.data() + f * stride_, stride_};
  }
  std::span<const HistEntry> feature(std::size_t f) const {
    return {data_.data() + f * stride_, stride_};
  }
  std::size_t n_features() const { return n_features_; }
  int max_bins() const { return static_cast<int>(stride_); }
  void clear();
  /// this = parent - other, entry by entry.
  void subtract_from(const Histogram& parent, const Histogram& other);

 private:
  std::size_t n_features_ = 0;
  std::size_t stride_ = 0;
  std::vector<HistEntry> data_;
};

struct SplitInfo {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
  double left_g = 0.0, left_h = 0.0;
  double right_g = 0.0, right_h = 0.0;
  std::uint32_t left_count = 0, right_count = 0;

  bool valid() const { return feature >= 0; }
};

/// Second-order gain G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l).
double split_gain(double gl, double hl, double gr, double hr, double lambda);

/// Best (feature, bin boundary) over the features with feature_mask[f] != 0
/// (all when the mask is empty) and bins_per_feature[f] bins. Ties go to the
/// lowest feature, then the lowest bin. Returns an invalid split when no
/// candidate has gain > 0 or satisfies min_samples_leaf on both sides.
SplitInfo best_split(const Histogram& hist, std::span<const int> bins_per_feature,
                     std::span<const char> feature_mask, double lambda, int min_samples_leaf);

// ---------------------------------------------------------------------------
// Trees and models

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  int bin = -1;      // training-time bin boundary (not persisted)
  double threshold = 0.0;
  double gain = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
  int num_leaves() const;
};

class BoostedModel {
 public:
  GbdtParams params;
  std::size_t num_features = 0;
  std::vector<std::string> feature_names;
  std::vector<double> base_score;  // one per output
  std::vector<Tree> trees;         // iteration-major, class-minor
  int best_iteration = 0;
  int iterations_run = 0;

  int num_outputs() const { return params.trees_per_iteration(); }
  int num_classes() const { return params.objective == Objective::Binary ? 2 : params.num_class; }
  int completed_iterations() const {
    return static_cast<int>(trees.size()) / num_outputs();
  }

  /// Raw scores (logits) of one row; out has num_outputs() entries.
  void predict_raw(std::span<const double> row, std::span<double> out) const;

  /// Class probabilities: {1 - p, p} for binary, softmax for multiclass.
  std::vector<double> predict_proba(std::span<const double> row) const;

  int predict_class(std::span<const double> row) const;
};

/// A model with no trees whose base scores are all zero.
BoostedModel empty_model(const GbdtParams& params, std::size_t num_features);

struct IterationLog {
  int iteration = 0;
  double train_loss = 0.0;
  std::optional<double> valid_loss;
};

/// Training input: row-major features plus per-row targets. For binary,
/// targets holds one value in [0, 1] per row; for multiclass, num_class
/// probabilities per row (one-hot for hard labels).
struct TrainSet {
  std::span<const double> features;
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::span<const double> targets;
};

/// Validation input for early stopping: hard labels.
struct ValidSet {
  std::span<const double> features;
  std::size_t n_rows = 0;
  std::span<const int> labels;
};

struct TrainOptions {
  std::vector<std::string> feature_names;
  std::function<void(const IterationLog&)> on_iteration;
};

BoostedModel train_on_targets(const GbdtParams& params, const TrainSet& train,
                              const std::optional<ValidSet>& valid,
                              const TrainOptions& options = {},
                              std::vector<IterationLog>* log = nullptr);

/// Hard-label training: labels are 0/1 for binary and class indices for multiclass.
BoostedModel train(const GbdtParams& params, std::span<const double> features,
                   std::size_t n_rows, std::size_t n_features, std::span<const int> labels,
                   const std::optional<ValidSet>& valid, const TrainOptions& options = {},
                   std::vector<IterationLog>* log = nullptr);

/// One-hot (multiclass) or 0/1 (binary) target vector for hard labels.
std::vector<double> hard_targets(const GbdtParams& params, std::span<const int> labels);

/// Mean log-loss of hard labels under the model's current raw scores.
double mean_log_loss(const GbdtParams& params, std::span<const double> scores,
                     std::span<const int> labels);

std::vector<double> feature_importance_gain(const BoostedModel& model);

// ---------------------------------------------------------------------------
// Text serialization

void save(const BoostedModel& model, std::ostream& out);
void save(const BoostedModel& model, const std::filesystem::path& path);
BoostedModel load(std::istream& in);
BoostedModel load(const std::filesystem::path& path);

}  // namespace mgids::gbdt
