#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "ecaml/confusion.hpp"
#include "ecaml/errors.hpp"
#include "support/oracles.hpp"

using namespace ecaml;

namespace {

std::vector<double> flat(const Matrix& m) { return {m.flat().begin(), m.flat().end()}; }

std::vector<ClassGroup> layout(std::size_t classes, std::size_t per_class) {
  std::vector<ClassGroup> g;
  for (std::size_t c = 0; c < classes; ++c) {
    ClassGroup group{static_cast<Label>(c), {}};
    for (std::size_t k = 0; k < per_class; ++k) group.rows.push_back(c * per_class + k);
    g.push_back(group);
  }
  return g;
}

Matrix group_rows(const Matrix& e, const ClassGroup& g) { return gather_rows(e, g.rows); }

}  // namespace

TEST_CASE("energy confusion: hand examples") {
  Matrix e(2, 2);
  e(0, 0) = 1;
  e(1, 1) = 1;
  ClassGroup i{0, {0}}, j{1, {1}};
  CHECK(energy_confusion(e, i, j).value == 2.0);
  CHECK(log_energy_confusion(e, i, j).value == Catch::Approx(std::log(3.0)).margin(1e-15));

  Matrix same(2, 3, 0.7);
  LossOutput z = energy_confusion(same, i, j);
  CHECK(z.value == 0.0);
  for (double g : z.grad.flat()) CHECK(g == 0.0);
  CHECK(log_energy_confusion(same, i, j).value == 0.0);

  Matrix three(3, 2);
  three(0, 0) = 1;
  three(1, 1) = 1;
  three(2, 0) = -1;
  CHECK(energy_confusion(three, ClassGroup{0, {0, 1}}, ClassGroup{1, {2}}).value == Catch::Approx(3.0).margin(1e-15));
}

TEST_CASE("energy confusion: preconditions") {
  Matrix e(3, 2, 1.0);
  CHECK_THROWS_AS(energy_confusion(e, ClassGroup{0, {0}}, ClassGroup{0, {1}}), PreconditionError);
  CHECK_THROWS_AS(energy_confusion(e, ClassGroup{0, {}}, ClassGroup{1, {1}}), PreconditionError);
}

TEST_CASE("energy confusion: value and gradients match the brute-force oracle") {
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<std::size_t> size(1, 5);
  for (int inst = 0; inst < 20; ++inst) {
    std::size_t ni = size(rng), nj = size(rng), d = 4;
    Matrix e = oracle::random_matrix(ni + nj, d, rng);
    ClassGroup gi{3, {}}, gj{9, {}};
    for (std::size_t r = 0; r < ni; ++r) gi.rows.push_back(r);
    for (std::size_t r = 0; r < nj; ++r) gj.rows.push_back(ni + r);
    auto f = [&](const std::vector<double>& v) {
      Matrix m(ni + nj, d, v);
      return oracle::energy_confusion(group_rows(m, gi), group_rows(m, gj));
    };
    LossOutput ec = energy_confusion(e, gi, gj);
    CHECK(ec.value == Catch::Approx(f(flat(e))).epsilon(1e-13));
    CHECK(oracle::max_relative_error(flat(ec.grad), oracle::numeric_gradient(f, flat(e))) <= 1e-4);

    auto g = [&](const std::vector<double>& v) { return std::log1p(f(v)); };
    LossOutput lec = log_energy_confusion(e, gi, gj);
    CHECK(lec.value == Catch::Approx(g(flat(e))).epsilon(1e-13));
    CHECK(oracle::max_relative_error(flat(lec.grad), oracle::numeric_gradient(g, flat(e))) <= 1e-4);
  }
}

TEST_CASE("energy confusion: symmetry, translation invariance, nonnegativity") {
  std::mt19937_64 rng(21);
  for (int inst = 0; inst < 50; ++inst) {
    Matrix e = oracle::random_matrix(7, 3, rng);
    ClassGroup a{1, {0, 1, 2}}, b{2, {3, 4, 5, 6}};
    LossOutput ab = energy_confusion(e, a, b), ba = energy_confusion(e, b, a);
    CHECK(ab.value == ba.value);
    CHECK(ab.grad == ba.grad);
    CHECK(ab.value >= 0.0);
    CHECK(log_energy_confusion(e, a, b).value >= 0.0);
    Matrix shifted = e;
    std::normal_distribution<double> n(0.0, 5.0);
    double dx = n(rng), dy = n(rng), dz = n(rng);
    for (std::size_t r = 0; r < 7; ++r) {
      shifted(r, 0) += dx;
      shifted(r, 1) += dy;
      shifted(r, 2) += dz;
    }
    CHECK(std::abs(energy_confusion(shifted, a, b).value - ab.value) <= 1e-9);
  }
}

TEST_CASE("energy confusion: descent pulls two singletons together") {
  std::mt19937_64 rng(22);
  for (int inst = 0; inst < 20; ++inst) {
    Matrix e = oracle::random_matrix(2, 3, rng);
    ClassGroup a{0, {0}}, b{1, {1}};
    LossOutput ec = energy_confusion(e, a, b);
    // The gradient on x_0 points away from x_1, so -grad points toward it.
    double cos = 0.0;
    for (std::size_t c = 0; c < 3; ++c) cos += ec.grad(0, c) * (e(1, c) - e(0, c));
    CHECK(cos < 0.0);
    Matrix stepped = e;
    for (std::size_t i = 0; i < stepped.size(); ++i) stepped.flat()[i] -= 0.05 * ec.grad.flat()[i];
    CHECK(oracle::sq_dist(stepped, 0, stepped, 1) < oracle::sq_dist(e, 0, e, 1));
  }
}

TEST_CASE("select_class_pairs: counts, uniqueness and determinism") {
  std::mt19937_64 rng(23);
  EcConfig all;
  all.pair_mode = PairMode::all_unordered;
  auto g3 = layout(3, 2);
  CHECK(select_class_pairs(g3, all, rng).pairs.size() == 3);
  auto g64 = layout(64, 2);
  auto every = select_class_pairs(g64, all, rng).pairs;
  CHECK(every.size() == 2016);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto p : every) {
    CHECK(p.first != p.second);
    seen.insert({std::min(p.first, p.second), std::max(p.first, p.second)});
  }
  CHECK(seen.size() == 2016);

  EcConfig k8;
  k8.pair_mode = PairMode::sample_k;
  k8.sample_k = 8;
  std::mt19937_64 r1(99), r2(99);
  auto p1 = select_class_pairs(g64, k8, r1).pairs, p2 = select_class_pairs(g64, k8, r2).pairs;
  REQUIRE(p1.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(p1[i].first == p2[i].first);
    CHECK(p1[i].second == p2[i].second);
  }
  k8.sample_k = 100;
  CHECK(select_class_pairs(g3, k8, rng).pairs.size() == 3);

  auto one = select_class_pairs(layout(1, 2), all, rng);
  CHECK(one.pairs.empty());
  CHECK(one.too_few_groups);
}

TEST_CASE("select_class_pairs: sample_k draws pairs uniformly") {
  auto g = layout(5, 1);  // 10 unordered pairs
  EcConfig k;
  k.sample_k = 3;
  std::mt19937_64 rng(24);
  std::map<std::pair<std::size_t, std::size_t>, int> count;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    for (auto p : select_class_pairs(g, k, rng).pairs) ++count[{std::min(p.first, p.second), std::max(p.first, p.second)}];
  REQUIRE(count.size() == 10);
  const double expect = trials * 3.0 / 10.0, sd = std::sqrt(trials * 0.3 * 0.7);
  for (auto& [p, c] : count) CHECK(std::abs(c - expect) <= 4.0 * sd);
}

TEST_CASE("ecaml objective: lambda zero returns the base untouched") {
  std::mt19937_64 rng(25);
  Matrix e = oracle::random_matrix(6, 3, rng);
  LossOutput base{1.2345, oracle::random_matrix(6, 3, rng)};
  auto groups = layout(3, 2);
  EcConfig cfg;
  cfg.lambda = 0.0;
  cfg.pair_mode = PairMode::all_unordered;
  auto pairs = select_class_pairs(groups, cfg, rng).pairs;
  LossOutput out = ecaml_objective(base, e, groups, pairs, cfg);
  CHECK(out == base);
}

TEST_CASE("ecaml objective: additive composition") {
  Matrix e(2, 2);
  e(0, 0) = 1;
  e(1, 1) = 1;
  std::vector<ClassGroup> groups{{0, {0}}, {1, {1}}};
  EcConfig cfg;
  cfg.lambda = 1.0;
  cfg.log_form = true;
  std::vector<GroupPair> pairs{{0, 1}};
  LossOutput base{0.5, Matrix(2, 2)};
  CHECK(ecaml_objective(base, e, groups, pairs, cfg).value == Catch::Approx(0.5 + std::log(3.0)).margin(1e-14));
  cfg.log_form = false;
  cfg.lambda = 2.0;
  CHECK(ecaml_objective(base, e, groups, pairs, cfg).value == Catch::Approx(4.5).margin(1e-14));
}

TEST_CASE("confusion term averages over pairs and scales linearly in lambda") {
  std::mt19937_64 rng(26);
  Matrix e = oracle::random_matrix(8, 3, rng);
  auto groups = layout(4, 2);
  EcConfig cfg;
  cfg.pair_mode = PairMode::all_unordered;
  cfg.log_form = false;
  auto pairs = select_class_pairs(groups, cfg, rng).pairs;
  double mean = 0.0;
  for (auto p : pairs) mean += oracle::energy_confusion(group_rows(e, groups[p.first]), group_rows(e, groups[p.second]));
  mean /= static_cast<double>(pairs.size());
  cfg.lambda = 1.0;
  EcTerm t1 = confusion_term(e, groups, pairs, cfg);
  CHECK(t1.mean_value == Catch::Approx(mean).epsilon(1e-13));
  cfg.lambda = 3.0;
  EcTerm t3 = confusion_term(e, groups, pairs, cfg);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(t3.weighted_grad.flat()[i] == Catch::Approx(3.0 * t1.weighted_grad.flat()[i]).margin(1e-14));
}

TEST_CASE("ecaml objective gradient on an 8-class toy batch matches finite differences") {
  std::mt19937_64 rng(27);
  auto groups = layout(8, 2);
  for (bool log_form : {false, true}) {
    EcConfig cfg;
    cfg.lambda = 0.8;
    cfg.log_form = log_form;
    auto pairs = select_class_pairs(groups, cfg, rng).pairs;
    Matrix e = oracle::random_matrix(16, 4, rng);
    Matrix coeff = oracle::random_matrix(16, 4, rng);
    auto f = [&](const std::vector<double>& v) {
      Matrix m(16, 4, v);
      double base = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) base += coeff.flat()[i] * m.flat()[i];
      double s = 0.0;
      for (auto p : pairs) {
        double ec = oracle::energy_confusion(group_rows(m, groups[p.first]), group_rows(m, groups[p.second]));
        s += log_form ? std::log1p(ec) : ec;
      }
      return base + cfg.lambda * s / static_cast<double>(pairs.size());
    };
    LossOutput out = ecaml_objective(LossOutput{0.0, coeff}, e, groups, pairs, cfg);
    double base = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) base += coeff.flat()[i] * e.flat()[i];
    out.value += base;
    CHECK(out.value == Catch::Approx(f(flat(e))).epsilon(1e-12));
    CHECK(oracle::max_relative_error(flat(out.grad), oracle::numeric_gradient(f, flat(e))) <= 1e-4);
  }
}

TEST_CASE("EcConfig validation") {
  EcConfig c;
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda = 1.0;
  c.sample_k = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
