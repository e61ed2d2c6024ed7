#pragma once

// P x K minibatches (P classes, K instances each) and the tuple layouts the
// three baseline losses consume.

#include <cstddef>
#include <random>
#include <vector>

#include "ecaml/confusion.hpp"
#include "ecaml/dataset.hpp"
#include "ecaml/losses.hpp"

namespace ecaml {

struct BatchSpec {
  std::size_t classes_per_batch = 64;
  std::size_t instances_per_class = 2;

  void validate() const;
};

struct Batch {
  Matrix features;
  std::vector<Label> labels;
  // Group g owns rows [g*K, (g+1)*K).
  std::vector<ClassGroup> groups;
  // Dataset row each batch row came from.
  std::vector<std::size_t> source_rows;
};

// Throws SamplingError naming the deficit when the filtered split has fewer
// than P classes with at least K samples.
Batch sample_batch(const Dataset& data, const BatchSpec& spec, SplitFilter filter, std::mt19937_64& rng);

// One triplet per ordered within-class (anchor, positive) pair with a
// uniformly drawn negative from another class.
std::vector<Triplet> build_triplets(const Batch& batch, std::mt19937_64& rng);

// K == 2 layout: first instance is the anchor, second the positive; the
// negatives of an anchor are the positives of every other class.
std::vector<NPairTuple> build_npair_tuples(const Batch& batch);

// Every unordered row pair, flagged same-class or not.
std::vector<Pair> build_contrastive_pairs(const Batch& batch);

}  // namespace ecaml
