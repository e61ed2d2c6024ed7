#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ecaml {

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

using Objective = std::function<ValueAndGradient(std::span<const double>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares the analytic gradient at `point` against central differences
// with step `eps`, coordinate by coordinate. Relative error uses the
// denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport finite_diff_check(const Objective& objective, std::span<const double> point, double eps = 1e-5);

}  // namespace ecaml
