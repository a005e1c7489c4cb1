#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairgnn/attacks.hpp"
#include "fairgnn/error.hpp"
#include "fairgnn/rng.hpp"
#include "mia_cases.hpp"
#include "test_util.hpp"

using namespace fairgnn;

namespace {

// x: one informative column; y = [x > 0] when `separable`, else a coin flip.
struct Binary {
  Tensor x;
  std::vector<int> y;
};

Binary binary_data(std::size_t n, std::size_t d, bool separable, Rng& rng) {
  Binary b{testutil::random_tensor(n, d, rng), {}};
  for (std::size_t i = 0; i < n; ++i) b.y.push_back(separable ? (b.x(i, 0) > 0.0 ? 1 : 0)
                                                              : static_cast<int>(rng.below(2)));
  // Guarantee both classes.
  b.y[0] = 0;
  b.x(0, 0) = -std::abs(b.x(0, 0)) - 0.1;
  b.y[1] = 1;
  b.x(1, 0) = std::abs(b.x(1, 0)) + 0.1;
  return b;
}

double accuracy_of(const Attacker& a, const Tensor& x, const std::vector<int>& y) {
  const std::vector<int> p = a.predict(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += p[i] == y[i];
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("attack features") {
  const Tensor logits = Tensor::from_rows({{std::log(0.2), std::log(0.7), std::log(0.1)},
                                           {0.0, 0.0, 0.0}});
  const std::vector<int> labels{0, 2};
  const std::vector<std::size_t> members{0}, non_members{1};
  const AttackFeatures f = attack_features(logits, labels, members, non_members);
  REQUIRE(f.x.cols() == 5);
  CHECK(f.x(0, 0) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(f.x(0, 1) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(f.x(0, 2) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(f.x(0, 3) == doctest::Approx(-std::log(0.2)).epsilon(1e-14));
  CHECK(f.x(0, 4) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(f.x(1, 3) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(f.x(1, 4) == 0.0);
  CHECK(f.member == std::vector<int>{1, 0});

  SUBCASE("class order does not matter") {
    Rng rng(3);
    const Tensor z = testutil::random_tensor(20, 4, rng, 2.0);
    std::vector<int> y(20);
    for (int& v : y) v = static_cast<int>(rng.below(4));
    const std::size_t perm[] = {2, 0, 3, 1};
    Tensor zp(20, 4);
    std::vector<int> yp(20);
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t c = 0; c < 4; ++c) zp(i, perm[c]) = z(i, c);
      yp[i] = static_cast<int>(perm[static_cast<std::size_t>(y[i])]);
    }
    std::vector<std::size_t> m(10), nm(10);
    std::iota(m.begin(), m.end(), 0);
    std::iota(nm.begin(), nm.end(), 10);
    CHECK(attack_features(z, y, m, nm).x == attack_features(zp, yp, m, nm).x);
  }
  SUBCASE("losses are non-negative and posteriors sorted") {
    Rng rng(5);
    const Tensor z = testutil::random_tensor(30, 3, rng, 5.0);
    std::vector<int> y(30);
    for (int& v : y) v = static_cast<int>(rng.below(3));
    std::vector<std::size_t> m(15), nm(15);
    std::iota(m.begin(), m.end(), 0);
    std::iota(nm.begin(), nm.end(), 15);
    const AttackFeatures g = attack_features(z, y, m, nm);
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(g.x(i, 0) >= g.x(i, 1));
      CHECK(g.x(i, 1) >= g.x(i, 2));
      CHECK(g.x(i, 3) >= 0.0);
    }
  }
}

TEST_CASE("balanced member sets") {
  SyntheticSpec s;
  s.n_nodes = 200;
  const Graph g = generate_synthetic(s, 1);
  NodeSplit split = make_splits(g, {}, 1);
  Rng rng(1);
  TrainedModel model;
  model.logits = testutil::random_tensor(g.n_nodes, 2, rng);
  const AttackFeatures f = build_attack_features(model, g, split, 4);
  const auto members = std::count(f.member.begin(), f.member.end(), 1);
  CHECK(members * 2 == static_cast<long>(f.member.size()));
  CHECK(static_cast<std::size_t>(members) == std::min(split.train.size(), split.test.size()));
  for (std::size_t i = 0; i < f.nodes.size(); ++i) {
    const auto& side = f.member[i] == 1 ? split.train : split.test;
    CHECK(std::find(side.begin(), side.end(), f.nodes[i]) != side.end());
  }
  CHECK(build_attack_features(model, g, split, 4).x == f.x);
}

TEST_CASE("tree attacker") {
  Rng rng(11);
  SUBCASE("separable one-dimensional feature") {
    // 20 distinct levels, so every midpoint is a candidate threshold.
    Binary b = binary_data(300, 1, true, rng);
    for (std::size_t i = 0; i < 300; ++i) {
      b.x(i, 0) = static_cast<double>(rng.below(20)) - 9.5;
      b.y[i] = b.x(i, 0) > 0.0 ? 1 : 0;
    }
    CHECK(accuracy_of(fit_tree_attacker(b.x, b.y), b.x, b.y) == 1.0);
  }
  SUBCASE("labels independent of features") {
    const Binary train = binary_data(600, 4, false, rng), test = binary_data(600, 4, false, rng);
    const double acc = accuracy_of(fit_tree_attacker(train.x, train.y), test.x, test.y);
    CHECK(std::abs(acc - 0.5) <= 3.0 * std::sqrt(0.25 / 600.0));
  }
  SUBCASE("zero rounds predicts the base rate") {
    Binary b = binary_data(100, 2, true, rng);
    TreeConfig c;
    c.rounds = 0;
    const double rate = std::accumulate(b.y.begin(), b.y.end(), 0.0) / 100.0;
    for (double p : fit_tree_attacker(b.x, b.y, c).predict_proba(b.x))
      CHECK(p == doctest::Approx(rate).epsilon(1e-12));
  }
  SUBCASE("deterministic") {
    const Binary b = binary_data(200, 3, false, rng);
    CHECK(fit_tree_attacker(b.x, b.y).predict_proba(b.x) ==
          fit_tree_attacker(b.x, b.y).predict_proba(b.x));
  }
  SUBCASE("many unique values use quantile thresholds") {
    const Binary b = binary_data(2000, 1, true, rng);
    CHECK(accuracy_of(fit_tree_attacker(b.x, b.y), b.x, b.y) >= 0.99);
  }
  SUBCASE("errors") {
    const Tensor x(4, 1, 1.0);
    CHECK_THROWS_AS(fit_tree_attacker(x, std::vector<int>{1, 1, 1, 1}), Error);
    CHECK_THROWS_AS(fit_tree_attacker(x, std::vector<int>{0, 1, 2, 0}), Error);
    CHECK_THROWS_AS(fit_tree_attacker(x, std::vector<int>{0, 1}), ShapeError);
  }
}

TEST_CASE("mlp attacker") {
  Rng rng(12);
  SUBCASE("linearly separable, held out") {
    const Binary train = binary_data(400, 3, true, rng), test = binary_data(400, 3, true, rng);
    CHECK(accuracy_of(fit_mlp_attacker(train.x, train.y, {}, 1), test.x, test.y) >= 0.95);
  }
  SUBCASE("permuted labels") {
    const Binary train = binary_data(600, 4, false, rng), test = binary_data(600, 4, false, rng);
    const double acc = accuracy_of(fit_mlp_attacker(train.x, train.y, {}, 1), test.x, test.y);
    CHECK(std::abs(acc - 0.5) <= 3.0 * std::sqrt(0.25 / 600.0));
  }
  SUBCASE("deterministic per seed") {
    const Binary b = binary_data(200, 3, false, rng);
    CHECK(fit_mlp_attacker(b.x, b.y, {}, 7).predict_proba(b.x) ==
          fit_mlp_attacker(b.x, b.y, {}, 7).predict_proba(b.x));
    CHECK(fit_mlp_attacker(b.x, b.y, {}, 7).kind() == AttackerKind::mlp);
  }
  SUBCASE("single class") {
    CHECK_THROWS_AS(fit_mlp_attacker(Tensor(3, 2), std::vector<int>{0, 0, 0}), Error);
  }
}

TEST_CASE("membership inference on targets") {
  SUBCASE("constant predictor") {
    const testutil::MiaTarget t = testutil::constant_target(1);
    const AttackResults r = run_attacks(t.model, t.graph, t.split, 1);
    const double tol = testutil::mia_three_sigma(t, 1);
    CHECK(std::abs(r.mia_tree - 0.5) <= tol);
    CHECK(std::abs(r.mia_mlp - 0.5) <= tol);
  }
  SUBCASE("overfit target") {
    const testutil::MiaTarget t = testutil::overfit_target(1);
    CHECK(mia_accuracy(t.model, t.graph, t.split, AttackerKind::tree, 1) >= 0.6);
  }
  SUBCASE("regularized target") {
    const testutil::MiaTarget t = testutil::regularized_target(2);
    const AttackResults r = run_attacks(t.model, t.graph, t.split, 2);
    CHECK(r.mia_tree >= 0.45);
    CHECK(r.mia_tree <= 0.58);
    CHECK(r.mia_mlp >= 0.45);
    CHECK(r.mia_mlp <= 0.58);
    CHECK(mia_accuracy(t.model, t.graph, t.split, AttackerKind::mlp, 2) == r.mia_mlp);
  }
}
