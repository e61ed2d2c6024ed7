#include "ecaml/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ecaml/errors.hpp"

namespace ecaml {

GradCheckReport finite_diff_check(const Objective& objective, std::span<const double> point, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite-difference step must be > 0");
  const ValueAndGradient at = objective(point);
  if (at.gradient.size() != point.size()) throw ShapeError("objective gradient has wrong length");

  GradCheckReport report;
  std::vector<double> probe(point.begin(), point.end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double plus = objective(probe).value;
    probe[i] = saved - eps;
    const double minus = objective(probe).value;
    probe[i] = saved;

    const double numeric = (plus - minus) / (2.0 * eps);
    const double analytic = at.gradient[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_relative_error || i == 0) {
      report = {std::max(rel, report.max_relative_error), i, analytic, numeric};
    }
  }
  return report;
}

}  // namespace ecaml
