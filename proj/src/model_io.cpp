// Line-oriented text format:
//
//   mgids-gbdt 1
//   objective multiclass
//   num_class 7
//   num_features 36
//   feature_names V1,V2,...
//   base_score <k values>
//   best_iteration 104
//   iterations_run 124
//   params num_leaves=63 learning_rate=0.05 ...
//   num_trees 728
//   tree 0
//   N <feature> <threshold> <gain>     internal node, children follow in preorder
//   L <value>                          leaf
//   ...
//   end
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mgids/errors.hpp"
#include "mgids/gbdt.hpp"

namespace mgids::gbdt {

namespace {

constexpr const char* kMagic = "mgids-gbdt";
constexpr int kVersion = 1;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_node(const Tree& tree, int i, std::ostream& out) {
  const auto& n = tree.nodes[static_cast<std::size_t>(i)];
  if (n.is_leaf()) {
    out << "L " << num(n.value) << '\n';
    return;
  }
  out << "N " << n.feature << ' ' << num(n.threshold) << ' ' << num(n.gain) << '\n';
  write_node(tree, n.left, out);
  write_node(tree, n.right, out);
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw DataError("model file truncated: expected " + std::string(what) + " at line " +
                      std::to_string(line_no_ + 1));
    }
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
  std::size_t line_no() const { return line_no_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("model line " + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

std::string expect_key(LineReader& rd, const std::string& key) {
  std::string line = rd.next(key.c_str());
  if (line.rfind(key + " ", 0) != 0 && line != key) rd.fail("expected '" + key + "'");
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string{};
}

double parse_double(LineReader& rd, const std::string& tok) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) rd.fail("bad number '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    rd.fail("bad number '" + tok + "'");
  }
}

long parse_int(LineReader& rd, const std::string& tok) {
  try {
    std::size_t pos = 0;
    long v = std::stol(tok, &pos);
    if (pos != tok.size()) rd.fail("bad integer '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    rd.fail("bad integer '" + tok + "'");
  }
}

int read_node(LineReader& rd, Tree& tree, std::size_t num_features, int depth) {
  if (depth > 4096) rd.fail("tree too deep");
  std::string line = rd.next("tree node");
  std::istringstream ss(line);
  std::string kind;
  ss >> kind;
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (kind == "L") {
    std::string v, extra;
    if (!(ss >> v) || (ss >> extra)) rd.fail("malformed leaf record '" + line + "'");
    tree.nodes[static_cast<std::size_t>(id)].value = parse_double(rd, v);
    return id;
  }
  if (kind != "N") rd.fail("malformed node record '" + line + "'");
  std::string f, thr, gain, extra;
  if (!(ss >> f >> thr >> gain) || (ss >> extra)) rd.fail("malformed node record '" + line + "'");
  const long feature = parse_int(rd, f);
  if (feature < 0 || static_cast<std::size_t>(feature) >= num_features) {
    rd.fail("feature index " + f + " out of range");
  }
  TreeNode node;
  node.feature = static_cast<int>(feature);
  node.threshold = parse_double(rd, thr);
  node.gain = parse_double(rd, gain);
  node.left = read_node(rd, tree, num_features, depth + 1);
  node.right = read_node(rd, tree, num_features, depth + 1);
  tree.nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace

void save(const BoostedModel& model, std::ostream& out) {
  const auto& p = model.params;
  out << kMagic << ' ' << kVersion << '\n';
  out << "objective " << (p.objective == Objective::Binary ? "binary" : "multiclass") << '\n';
  out << "num_class " << p.num_class << '\n';
  out << "num_features " << model.num_features << '\n';
  out << "feature_names";
  for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
    out << (i ? ',' : ' ') << model.feature_names[i];
  }
  out << '\n';
  out << "base_score";
  for (double b : model.base_score) out << ' ' << num(b);
  out << '\n';
  out << "best_iteration " << model.best_iteration << '\n';
  out << "iterations_run " << model.iterations_run << '\n';
  out << "params num_leaves=" << p.num_leaves << " learning_rate=" << num(p.learning_rate)
      << " feature_fraction=" << num(p.feature_fraction)
      << " bagging_fraction=" << num(p.bagging_fraction) << " bagging_freq=" << p.bagging_freq
      << " num_iterations=" << p.num_iterations
      << " early_stopping_rounds=" << p.early_stopping_rounds << " max_bins=" << p.max_bins
      << " lambda_l2=" << num(p.lambda_l2) << " min_samples_leaf=" << p.min_samples_leaf
      << " seed=" << p.seed << '\n';
  out << "num_trees " << model.trees.size() << '\n';
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    out << "tree " << t << '\n';
    write_node(model.trees[t], 0, out);
  }
  out << "end\n";
}

void save(const BoostedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  save(model, out);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

BoostedModel load(std::istream& in) {
  LineReader rd(in);
  {
    std::string line = rd.next("header");
    std::istringstream ss(line);
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != kMagic) rd.fail("not an mgids-gbdt model file");
    if (version != kVersion) {
      rd.fail("unsupported model version " + std::to_string(version) + " (expected " +
              std::to_string(kVersion) + ")");
    }
  }
  BoostedModel m;
  const std::string objective = expect_key(rd, "objective");
  if (objective == "binary") {
    m.params.objective = Objective::Binary;
  } else if (objective == "multiclass") {
    m.params.objective = Objective::Multiclass;
  } else {
    rd.fail("unknown objective '" + objective + "'");
  }
  m.params.num_class = static_cast<int>(parse_int(rd, expect_key(rd, "num_class")));
  m.num_features = static_cast<std::size_t>(parse_int(rd, expect_key(rd, "num_features")));
  {
    std::string names = expect_key(rd, "feature_names");
    std::istringstream ss(names);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) m.feature_names.push_back(name);
    }
  }
  {
    std::istringstream ss(expect_key(rd, "base_score"));
    std::string tok;
    while (ss >> tok) m.base_score.push_back(parse_double(rd, tok));
    if (m.base_score.size() != static_cast<std::size_t>(m.params.trees_per_iteration())) {
      rd.fail("base_score count does not match the objective");
    }
  }
  m.best_iteration = static_cast<int>(parse_int(rd, expect_key(rd, "best_iteration")));
  m.iterations_run = static_cast<int>(parse_int(rd, expect_key(rd, "iterations_run")));
  {
    std::istringstream ss(expect_key(rd, "params"));
    std::string kv;
    auto& p = m.params;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) rd.fail("malformed parameter '" + kv + "'");
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "num_leaves") p.num_leaves = static_cast<int>(parse_int(rd, val));
      else if (key == "learning_rate") p.learning_rate = parse_double(rd, val);
      else if (key == "feature_fraction") p.feature_fraction = parse_double(rd, val);
      else if (key == "bagging_fraction") p.bagging_fraction = parse_double(rd, val);
      else if (key == "bagging_freq") p.bagging_freq = static_cast<int>(parse_int(rd, val));
      else if (key == "num_iterations") p.num_iterations = static_cast<int>(parse_int(rd, val));
      else if (key == "early_stopping_rounds") p.early_stopping_rounds = static_cast<int>(parse_int(rd, val));
      else if (key == "max_bins") p.max_bins = static_cast<int>(parse_int(rd, val));
      else if (key == "lambda_l2") p.lambda_l2 = parse_double(rd, val);
      else if (key == "min_samples_leaf") p.min_samples_leaf = static_cast<int>(parse_int(rd, val));
      else if (key == "seed") p.seed = static_cast<std::uint64_t>(std::stoull(val));
    }
  }
  const long n_trees = parse_int(rd, expect_key(rd, "num_trees"));
  if (n_trees < 0) rd.fail("negative tree count");
  m.trees.reserve(static_cast<std::size_t>(n_trees));
  for (long t = 0; t < n_trees; ++t) {
    const long idx = parse_int(rd, expect_key(rd, "tree"));
    if (idx != t) rd.fail("expected tree " + std::to_string(t));
    Tree tree;
    read_node(rd, tree, m.num_features, 0);
    m.trees.push_back(std::move(tree));
  }
  if (rd.next("end marker") != "end") rd.fail("expected 'end'");
  if (m.trees.size() % static_cast<std::size_t>(m.num_outputs()) != 0) {
    throw DataError("model tree count is not a multiple of the outputs per iteration");
  }
  return m;
}

BoostedModel load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path.string() + "'");
  return load(in);
}

}  // namespace mgids::gbdt
