#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "mgids/errors.hpp"
#include "mgids/gbdt.hpp"

using namespace mgids;
using namespace mgids::gbdt;

namespace {

// Four well-separated classes on two features: class = [x0 > .5] + 2 [x1 > .5].
struct Toy {
  std::vector<double> x;
  std::vector<int> y;
  std::size_t n = 0;
};

Toy quadrant_toy(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Values stay clear of the class boundary so quantile bins can separate them.
  std::uniform_real_distribution<double> u(0.0, 0.45);
  auto draw = [&] { return u(rng) + (rng() % 2 ? 0.55 : 0.0); };
  Toy t;
  t.n = n;
  for (std::size_t r = 0; r < n; ++r) {
    const double a = draw(), b = draw();
    t.x.push_back(a);
    t.x.push_back(b);
    t.y.push_back((a > 0.5 ? 1 : 0) + (b > 0.5 ? 2 : 0));
  }
  return t;
}

GbdtParams small_params(int num_class) {
  GbdtParams p;
  p.num_class = num_class;
  p.num_leaves = 7;
  p.learning_rate = 0.1;
  p.num_iterations = 20;
  p.min_samples_leaf = 5;
  p.feature_fraction = 1.0;
  p.bagging_fraction = 1.0;
  return p;
}

double accuracy(const BoostedModel& m, const Toy& t) {
  std::size_t ok = 0;
  for (std::size_t r = 0; r < t.n; ++r) {
    ok += m.predict_class(std::span<const double>(t.x).subspan(2 * r, 2)) == t.y[r];
  }
  return static_cast<double>(ok) / static_cast<double>(t.n);
}

}  // namespace

TEST_CASE("binary gradient and hessian") {
  auto gh = binary_grad_hess(1.0, 0.0);
  CHECK(gh.g == doctest::Approx(-0.5));
  CHECK(gh.h == doctest::Approx(0.25));
  gh = binary_grad_hess(0.0, std::log(3.0));  // p = 0.75
  CHECK(gh.g == doctest::Approx(0.75));
  CHECK(gh.h == doctest::Approx(0.1875));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("softmax gradient, uniform 7-class") {
  std::vector<double> logits(7, 0.0), target(7, 0.0), g(7), h(7);
  target[3] = 1.0;
  softmax_grad_hess(target, logits, g, h);
  for (std::size_t k = 0; k < 7; ++k) {
    CHECK(g[k] == doctest::Approx(k == 3 ? 1.0 / 7.0 - 1.0 : 1.0 / 7.0));
    CHECK(h[k] == doctest::Approx(6.0 / 49.0));
  }
  // Shift invariance and stability for huge logits.
  const std::vector<double> big{1000.0, 1001.0, 1002.0};
  const auto p = softmax(big);
  const std::vector<double> small{0.0, 1.0, 2.0};
  const auto q = softmax(small);
  for (std::size_t k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(q[k]));
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("feature bins") {
  SUBCASE("two distinct values give two bins") {
    const std::vector<double> v{1.0, 2.0, 1.0, 2.0, 2.0};
    const auto b = build_feature_bins(v, 255);
    CHECK(b.n_bins() == 2);
    CHECK(b.bin(1.0) == 0);
    CHECK(b.bin(2.0) == 1);
    CHECK(b.threshold(0) == doctest::Approx(1.5));
  }
  SUBCASE("constant column gives one bin") {
    const std::vector<double> v(50, 4.2);
    CHECK(build_feature_bins(v, 16).n_bins() == 1);
  }
  SUBCASE("uniform data fills quantile bins evenly") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(10000);
    for (double& x : v) x = u(rng);
    const auto b = build_feature_bins(v, 10);
    REQUIRE(b.n_bins() == 10);
    std::vector<int> count(10, 0);
    for (double x : v) ++count[b.bin(x)];
    for (int c : count) CHECK(std::abs(c - 1000) <= 50);
  }
  SUBCASE("bin index is monotone in the value") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    std::vector<double> v(3000);
    for (double& x : v) x = g(rng);
    const auto b = build_feature_bins(v, 32);
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(b.bin(v[i - 1]) <= b.bin(v[i]));
    CHECK(b.n_bins() <= 32);
  }
  CHECK_THROWS_AS(build_feature_bins(std::vector<double>{1.0}, 1), UsageError);
}

TEST_CASE("split gain hand example") {
  CHECK(split_gain(1.0, 1.0, -1.0, 1.0, 0.0) == doctest::Approx(2.0));
  CHECK(split_gain(2.0, 1.0, -2.0, 1.0, 1.0) == doctest::Approx(4.0));
  Histogram hist(1, 4);
  hist.feature(0)[0] = {1.0, 1.0, 30};
  hist.feature(0)[1] = {-1.0, 1.0, 30};
  const int nb[] = {2};
  const auto s = best_split(hist, nb, {}, 0.0, 20);
  REQUIRE(s.valid());
  CHECK(s.feature == 0);
  CHECK(s.bin == 0);
  CHECK(s.gain == doctest::Approx(2.0));
  CHECK(s.left_count == 30);
  // min_samples_leaf larger than either side: no split.
  CHECK_FALSE(best_split(hist, nb, {}, 0.0, 31).valid());
  // Masked-out feature: no split.
  const char mask[] = {0};
  CHECK_FALSE(best_split(hist, nb, mask, 0.0, 1).valid());
}

TEST_CASE("best split agrees with a brute-force oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> hu(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nf = 3, n = 200;
    const int max_bins = 8;
    std::vector<std::vector<int>> bin(nf, std::vector<int>(n));
    std::vector<double> g(n), h(n);
    for (std::size_t r = 0; r < n; ++r) {
      g[r] = u(rng);
      h[r] = hu(rng);
      for (std::size_t f = 0; f < nf; ++f) bin[f][r] = static_cast<int>(rng() % max_bins);
    }
    Histogram hist(nf, max_bins);
    for (std::size_t f = 0; f < nf; ++f) {
      for (std::size_t r = 0; r < n; ++r) {
        auto& e = hist.feature(f)[static_cast<std::size_t>(bin[f][r])];
        e.sum_g += g[r];
        e.sum_h += h[r];
        ++e.count;
      }
    }
    const int min_leaf = 10;
    const double lambda = 1.0;
    double best = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      for (int b = 0; b + 1 < max_bins; ++b) {
        double gl = 0, hl = 0, gr = 0, hr = 0;
        int cl = 0, cr = 0;
        for (std::size_t r = 0; r < n; ++r) {
          if (bin[f][r] <= b) {
            gl += g[r], hl += h[r], ++cl;
          } else {
            gr += g[r], hr += h[r], ++cr;
          }
        }
        if (cl < min_leaf || cr < min_leaf) continue;
        best = std::max(best, split_gain(gl, hl, gr, hr, lambda));
      }
    }
    const std::vector<int> nb(nf, max_bins);
    const auto s = best_split(hist, nb, {}, lambda, min_leaf);
    if (best > 0.0) {
      REQUIRE(s.valid());
      CHECK(s.gain == doctest::Approx(best).epsilon(1e-9));
      CHECK(s.left_count >= static_cast<std::uint32_t>(min_leaf));
      CHECK(s.right_count >= static_cast<std::uint32_t>(min_leaf));
    } else {
      CHECK_FALSE(s.valid());
    }
  }
}

TEST_CASE("histogram subtraction") {
  Histogram parent(2, 4), child(2, 4), rest(2, 4);
  parent.feature(1)[2] = {3.0, 2.0, 5};
  child.feature(1)[2] = {1.0, 0.5, 2};
  rest.subtract_from(parent, child);
  CHECK(rest.feature(1)[2].sum_g == 2.0);
  CHECK(rest.feature(1)[2].sum_h == 1.5);
  CHECK(rest.feature(1)[2].count == 3);
}

TEST_CASE("num_leaves = 2 grows stumps") {
  const auto toy = quadrant_toy(400, 1);
  auto p = small_params(4);
  p.num_leaves = 2;
  const auto m = train(p, toy.x, toy.n, 2, toy.y, std::nullopt);
  CHECK(m.trees.size() == 20 * 4);
  for (const auto& t : m.trees) CHECK(t.num_leaves() <= 2);
}

TEST_CASE("separable toy reaches perfect accuracy within 20 iterations") {
  const auto toy = quadrant_toy(800, 2);
  const auto m = train(small_params(4), toy.x, toy.n, 2, toy.y, std::nullopt);
  CHECK(accuracy(m, toy) == 1.0);
  CHECK(accuracy(m, quadrant_toy(400, 3)) == 1.0);

  auto bp = small_params(2);
  bp.objective = Objective::Binary;
  bp.num_class = 1;
  std::vector<int> yb(toy.y.size());
  for (std::size_t r = 0; r < yb.size(); ++r) yb[r] = toy.y[r] & 1;
  const auto mb = train(bp, toy.x, toy.n, 2, yb, std::nullopt);
  std::size_t ok = 0;
  for (std::size_t r = 0; r < toy.n; ++r) {
    ok += mb.predict_class(std::span<const double>(toy.x).subspan(2 * r, 2)) == yb[r];
  }
  CHECK(ok == toy.n);
}

TEST_CASE("training invariants") {
  const auto toy = quadrant_toy(600, 4);
  auto p = small_params(4);
  p.num_iterations = 30;
  p.bagging_fraction = 1.0;
  std::vector<IterationLog> log;
  const auto m = train(p, toy.x, toy.n, 2, toy.y, std::nullopt, {}, &log);
  REQUIRE(log.size() == 30);
  // Without bagging each Newton step cannot raise the training loss.
  for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i].train_loss <= log[i - 1].train_loss + 1e-12);
  for (const auto& t : m.trees) {
    CHECK(t.num_leaves() <= p.num_leaves);
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) CHECK(n.gain > 0.0);
    }
  }
  // Determinism.
  const auto again = train(p, toy.x, toy.n, 2, toy.y, std::nullopt);
  std::ostringstream a, b;
  save(m, a);
  save(again, b);
  CHECK(a.str() == b.str());
}

TEST_CASE("early stopping truncates to the best iteration") {
  const auto toy = quadrant_toy(600, 5);
  const auto val = quadrant_toy(300, 6);
  auto p = small_params(4);
  p.num_iterations = 300;
  p.learning_rate = 0.5;
  p.early_stopping_rounds = 5;
  std::vector<IterationLog> log;
  const auto m = train(p, toy.x, toy.n, 2, toy.y, ValidSet{val.x, val.n, val.y}, {}, &log);
  CHECK(m.best_iteration >= 1);
  CHECK(m.completed_iterations() == m.best_iteration);
  double best = 1e300;
  int arg = 0;
  for (const auto& e : log) {
    if (*e.valid_loss < best) best = *e.valid_loss, arg = e.iteration;
  }
  CHECK(arg == m.best_iteration);
}

TEST_CASE("empty model probabilities") {
  auto p = small_params(7);
  const auto m = empty_model(p, 3);
  const std::vector<double> row{0.1, 0.2, 0.3};
  for (double q : m.predict_proba(row)) CHECK(q == doctest::Approx(1.0 / 7.0));
  p.objective = Objective::Binary;
  const auto mb = empty_model(p, 3);
  CHECK(mb.predict_proba(row)[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(m.predict_class(std::vector<double>{1.0}), DataError);
}

TEST_CASE("gain importance of a stump") {
  auto m = empty_model(small_params(2), 3);
  m.params.objective = Objective::Binary;
  m.base_score = {0.0};
  Tree t;
  t.nodes.resize(3);
  t.nodes[0] = {2, 0, 0.5, 1.25, 1, 2, 0.0};
  t.nodes[1].value = -1.0;
  t.nodes[2].value = 1.0;
  m.trees.push_back(t);
  m.trees.push_back(t);
  const auto imp = feature_importance_gain(m);
  CHECK(imp == std::vector<double>{0.0, 0.0, 2.5});
  CHECK(m.predict_class(std::vector<double>{0, 0, 0.4}) == 0);
  CHECK(m.predict_class(std::vector<double>{0, 0, 0.6}) == 1);
}

TEST_CASE("model text round trip") {
  const auto toy = quadrant_toy(300, 7);
  TrainOptions opts;
  opts.feature_names = {"a", "b"};
  const auto m = train(small_params(4), toy.x, toy.n, 2, toy.y, std::nullopt, opts);
  std::stringstream ss;
  save(m, ss);
  const std::string text = ss.str();
  const auto back = load(ss);
  CHECK(back.feature_names == opts.feature_names);
  CHECK(back.trees.size() == m.trees.size());
  CHECK(back.best_iteration == m.best_iteration);
  CHECK(back.params.num_leaves == m.params.num_leaves);
  std::vector<double> a(4), b(4);
  for (std::size_t r = 0; r < toy.n; ++r) {
    const auto row = std::span<const double>(toy.x).subspan(2 * r, 2);
    m.predict_raw(row, a);
    back.predict_raw(row, b);
    CHECK(a == b);
  }
  std::ostringstream again;
  save(back, again);
  CHECK(again.str() == text);

  SUBCASE("corrupt input") {
    std::string bad = text;
    bad.replace(bad.find("L "), 2, "X ");
    std::istringstream in(bad);
    CHECK_THROWS_AS(load(in), DataError);
    std::istringstream truncated(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load(truncated), DataError);
    std::istringstream wrong("not-a-model 1\n");
    CHECK_THROWS_AS(load(wrong), DataError);
  }
}

TEST_CASE("parameter validation") {
  auto p = small_params(4);
  p.num_leaves = 1;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = small_params(4);
  p.learning_rate = 0.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = small_params(4);
  p.max_bins = 256;
  CHECK_THROWS_AS(p.validate(), UsageError);
  const std::vector<int> single(10, 0);
  const std::vector<double> x(10, 1.0);
  CHECK_THROWS_AS(train(small_params(4), x, 10, 1, single, std::nullopt), DataError);
  const std::vector<int> out_of_range(10, 9);
  CHECK_THROWS_AS(train(small_params(4), x, 10, 1, out_of_range, std::nullopt), DataError);
}
