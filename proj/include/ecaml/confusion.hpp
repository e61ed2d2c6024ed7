#pragma once

// Energy Confusion: the mean squared Euclidean distance between the
// embeddings of two different classes, used as an adversarial penalty next
// to a discriminative metric loss.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "ecaml/losses.hpp"
#include "ecaml/matrix.hpp"
#include "ecaml/types.hpp"

namespace ecaml {

enum class PairMode { all_unordered, sample_k };

struct EcConfig {
  double lambda = 30.0;
  PairMode pair_mode = PairMode::sample_k;
  std::size_t sample_k = 8;
  bool log_form = true;
  // Only the output layer sees the confusion gradient.
  bool stop_gradient_before_last_layer = true;

  void validate() const;
};

// Mean over all cross pairs of |x_i - x_j|^2 between two point sets (rows).
double energy_confusion_value(const Matrix& x, const Matrix& y);

LossOutput energy_confusion(const Matrix& embeddings, const ClassGroup& first, const ClassGroup& second);
LossOutput log_energy_confusion(const Matrix& embeddings, const ClassGroup& first, const ClassGroup& second);

struct GroupPair {
  std::size_t first;   // index into the group list
  std::size_t second;
};

struct PairSelection {
  std::vector<GroupPair> pairs;
  // Set when fewer than two groups were supplied.
  bool too_few_groups = false;
};

// Unordered pairs of distinct-label groups: all of them, or k drawn
// uniformly without replacement (k capped at the number available).
PairSelection select_class_pairs(std::span<const ClassGroup> groups, const EcConfig& cfg, std::mt19937_64& rng);

struct EcTerm {
  // Mean (log-)EC over the selected pairs, before scaling by lambda.
  double mean_value = 0.0;
  // Gradient of lambda * mean_value.
  Matrix weighted_grad;
};

// lambda-weighted mean of (log-)EC over the given pairs.
EcTerm confusion_term(const Matrix& embeddings, std::span<const ClassGroup> groups,
                      std::span<const GroupPair> pairs, const EcConfig& cfg);

// base + lambda * mean (log-)EC. With lambda == 0 the base output is
// returned untouched.
LossOutput ecaml_objective(const LossOutput& base, const Matrix& embeddings, std::span<const ClassGroup> groups,
                           std::span<const GroupPair> pairs, const EcConfig& cfg);

}  // namespace ecaml
