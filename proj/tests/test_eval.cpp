#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "ecaml/errors.hpp"
#include "ecaml/eval.hpp"
#include "support/oracles.hpp"

using namespace ecaml;

namespace {

std::vector<Label> random_labels(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  // Every class at least twice, the rest uniform.
  std::vector<Label> l;
  for (std::size_t c = 0; c < classes; ++c) l.insert(l.end(), 2, static_cast<Label>(c));
  std::uniform_int_distribution<Label> pick(0, static_cast<Label>(classes) - 1);
  while (l.size() < n) l.push_back(pick(rng));
  std::shuffle(l.begin(), l.end(), rng);
  return l;
}

std::vector<std::size_t> random_assignment(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<std::size_t> a(n);
  for (auto& v : a) v = pick(rng);
  return a;
}

}  // namespace

TEST_CASE("pairwise distances: orthonormal rows, symmetry and naive oracle") {
  Matrix eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  Matrix m = pairwise_sq_distances(eye);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(m(i, j) == (i == j ? 0.0 : 2.0));

  std::mt19937_64 rng(40);
  Matrix x = oracle::random_matrix(30, 7, rng);
  Matrix d = pairwise_sq_distances(x);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(d(i, i) == 0.0);
    for (std::size_t j = 0; j < 30; ++j) {
      CHECK(d(i, j) == d(j, i));
      CHECK(d(i, j) >= 0.0);
      CHECK(std::abs(d(i, j) - oracle::sq_dist(x, i, x, j)) <= 1e-10);
    }
  }
}

TEST_CASE("recall: twins and adversarial labels") {
  Matrix twins(4, 2);
  twins(0, 0) = twins(1, 0) = 1.0;
  twins(2, 1) = twins(3, 1) = 1.0;
  std::vector<Label> l{0, 0, 1, 1};
  std::vector<std::size_t> k1{1};
  CHECK(recall_at_k(twins, l, k1).recall_at.at(1) == 1.0);
  std::vector<Label> adv{0, 1, 0, 1};
  CHECK(recall_at_k(twins, adv, k1).recall_at.at(1) == 0.0);
  std::vector<Label> single{0, 0, 1, 2};
  CHECK_THROWS_AS(recall_at_k(twins, single, k1), PreconditionError);
}

TEST_CASE("recall: ties go to the lower row index") {
  // Rows 1 and 2 are equidistant from row 0; row 1 is a different class.
  Matrix e(4, 1);
  e(0, 0) = 0.0;
  e(1, 0) = 1.0;
  e(2, 0) = -1.0;
  e(3, 0) = 5.0;
  std::vector<Label> l{0, 1, 0, 1};
  std::vector<std::size_t> ks{1, 2};
  RetrievalReport r = recall_at_k(e, l, ks);
  auto o = oracle::recall_at_k(e, l, {1, 2});
  CHECK(r.recall_at.at(1) == o.at(1));
  CHECK(r.recall_at.at(2) == o.at(2));
}

TEST_CASE("recall equals the brute-force ranking oracle exactly") {
  std::mt19937_64 rng(41);
  std::vector<std::size_t> ks{1, 2, 4, 8};
  for (int inst = 0; inst < 100; ++inst) {
    Matrix e = oracle::random_matrix(50, 4, rng);
    if (inst % 3 == 0) {
      // Quantize to force exact distance ties.
      for (double& v : e.flat()) v = std::round(v);
    }
    auto labels = random_labels(50, 6, rng);
    RetrievalReport r = recall_at_k(e, labels, ks);
    auto o = oracle::recall_at_k(e, labels, ks);
    CHECK(r.queries == 50);
    for (std::size_t k : ks) CHECK(r.recall_at.at(k) == o.at(k));
    for (std::size_t i = 1; i < ks.size(); ++i) CHECK(r.recall_at.at(ks[i]) >= r.recall_at.at(ks[i - 1]));
    std::vector<std::size_t> all{49};
    CHECK(recall_at_k(e, labels, all).recall_at.at(49) == 1.0);
  }
}

TEST_CASE("kmeans: K = N, separated blobs, determinism") {
  std::mt19937_64 rng(42);
  Matrix e = oracle::random_matrix(6, 2, rng);
  KMeansResult all = kmeans(e, {6, 1});
  CHECK(all.inertia == Catch::Approx(0.0).margin(1e-20));
  std::set<std::size_t> distinct(all.assignments.begin(), all.assignments.end());
  CHECK(distinct.size() == 6);
  CHECK_THROWS_AS(kmeans(e, {7, 1}), PreconditionError);

  Matrix blobs = oracle::random_matrix(40, 3, rng, 0.1);
  for (std::size_t i = 20; i < 40; ++i) blobs(i, 0) += 5.0;  // 50 sigma apart
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    KMeansResult r = kmeans(blobs, {2, seed});
    for (std::size_t i = 0; i < 40; ++i) CHECK((r.assignments[i] == r.assignments[0]) == (i < 20));
  }
  KMeansResult a = kmeans(blobs, {3, 9}), b = kmeans(blobs, {3, 9});
  CHECK(a.assignments == b.assignments);
  CHECK(a.centroids == b.centroids);
}

TEST_CASE("nmi: hand cases and contingency oracle") {
  std::vector<std::size_t> perfect{0, 0, 1, 1, 2, 2};
  std::vector<Label> labels{5, 5, 7, 7, 9, 9};
  CHECK(nmi(perfect, labels) == 1.0);
  std::vector<std::size_t> one(4, 0);
  std::vector<Label> two{0, 0, 1, 1};
  CHECK(nmi(one, two) == 0.0);
  CHECK_THROWS(nmi(one, labels));

  std::mt19937_64 rng(43);
  for (int inst = 0; inst < 100; ++inst) {
    auto a = random_assignment(40, 5, rng);
    auto l = random_labels(40, 4, rng);
    CHECK(std::abs(nmi(a, l) - oracle::nmi(a, l)) <= 1e-12);
    // Relabelling clusters leaves NMI unchanged.
    auto relabelled = a;
    for (auto& v : relabelled) v = 4 - v;
    CHECK(std::abs(nmi(relabelled, l) - nmi(a, l)) <= 1e-12);
  }
}

TEST_CASE("pairwise F1: hand cases and pair-enumeration oracle") {
  std::vector<std::size_t> perfect{3, 3, 1, 1};
  std::vector<Label> labels{0, 0, 1, 1};
  CHECK(pairwise_f1(perfect, labels) == 1.0);
  std::vector<std::size_t> singletons{0, 1, 2, 3};
  CHECK(pairwise_f1(singletons, labels) == 0.0);

  std::mt19937_64 rng(44);
  for (int inst = 0; inst < 100; ++inst) {
    auto a = random_assignment(30, 4, rng);
    auto l = random_labels(30, 4, rng);
    CHECK(std::abs(pairwise_f1(a, l) - oracle::pairwise_f1(a, l)) <= 1e-12);
  }
}

TEST_CASE("clustering report on perfectly separated classes is exact") {
  std::mt19937_64 rng(45);
  Matrix e = oracle::random_matrix(30, 2, rng, 0.01);
  std::vector<Label> l(30);
  for (std::size_t i = 0; i < 30; ++i) {
    l[i] = static_cast<Label>(i % 3);
    e(i, 0) += 10.0 * (i % 3);
  }
  ClusteringReport r = evaluate_clustering(e, l, 7);
  CHECK(r.clusters == 3);
  CHECK(r.nmi == 1.0);
  CHECK(r.f1 == 1.0);
}

TEST_CASE("metrics are invariant under a common rotation") {
  std::mt19937_64 rng(46);
  Matrix e = oracle::random_matrix(40, 4, rng);
  auto l = random_labels(40, 5, rng);
  Matrix rot = oracle::times(e, oracle::random_rotation(4, rng));
  std::vector<std::size_t> ks{1, 4};
  auto a = recall_at_k(e, l, ks), b = recall_at_k(rot, l, ks);
  CHECK(a.recall_at == b.recall_at);
}

TEST_CASE("l2_normalized leaves zero rows alone") {
  Matrix e(2, 2);
  e(0, 0) = 3;
  e(0, 1) = 4;
  Matrix n = l2_normalized(e);
  CHECK(n(0, 0) == Catch::Approx(0.6));
  CHECK(n(0, 1) == Catch::Approx(0.8));
  CHECK(n(1, 0) == 0.0);
}
