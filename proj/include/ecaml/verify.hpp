#pragma once

// Randomized property suite: the energy-confusion bounds on GED and MMD,
// negative type of squared Euclidean distance, PSD distance-induced Gram
// matrices, and finite-difference checks of every analytic gradient.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace ecaml {

struct PropertyResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t violations = 0;
  // Largest violation margin seen (0 when none); for gradient checks the
  // largest relative error.
  double worst = 0.0;
  double tolerance = 0.0;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::size_t fuzz = 0;
  std::vector<PropertyResult> properties;

  std::size_t violations() const;
  bool ok() const { return violations() == 0; }
  nlohmann::json to_json() const;
};

// `fuzz` random instances per divergence property, `gradient_instances`
// per gradient check.
VerifyReport run_property_suite(std::size_t fuzz, std::uint64_t seed, std::size_t gradient_instances = 20);

}  // namespace ecaml
