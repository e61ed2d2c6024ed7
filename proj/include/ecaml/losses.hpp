#pragma once

// Baseline metric objectives. Each returns the summed loss over its tuples
// and the gradient with respect to every embedding row.

#include <cstddef>
#include <span>
#include <vector>

#include "ecaml/matrix.hpp"

namespace ecaml {

struct LossOutput {
  double value = 0.0;
  Matrix grad;

  bool operator==(const LossOutput&) const = default;
};

struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
};

struct TripletConfig {
  double margin = 0.1;
};

// Hinge on squared distances of unit-norm embeddings. Inactive triplets,
// including ties exactly at the hinge, contribute no gradient.
LossOutput triplet_loss(const Matrix& embeddings, std::span<const Triplet> triplets, const TripletConfig& cfg = {});

struct NPairTuple {
  std::size_t anchor;
  std::size_t positive;
  std::vector<std::size_t> negatives;
};

struct NPairResult {
  LossOutput loss;
  // Tuples dropped because they had no negatives.
  std::size_t skipped = 0;
};

// log(1 + sum_j exp(a.n_j - a.p)) per tuple on raw inner products,
// evaluated through a shifted log-sum-exp.
NPairResult npair_loss(const Matrix& embeddings, std::span<const NPairTuple> tuples);

struct Pair {
  std::size_t i;
  std::size_t j;
  bool same_class;
};

struct BinomialConfig {
  double alpha = 2.0;
  double beta = 0.5;
  double eta_pos = 1.0;
  double eta_neg = 25.0;
};

// Binomial deviance on cosine similarity.
LossOutput binomial_loss(const Matrix& embeddings, std::span<const Pair> pairs, const BinomialConfig& cfg = {});

// log(1 + e^z) without overflow.
double softplus(double z) noexcept;

// 1 / (1 + e^-z) without overflow.
double logistic(double z) noexcept;

}  // namespace ecaml
