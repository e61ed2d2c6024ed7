#include "ecaml/divergences.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ecaml/confusion.hpp"
#include "ecaml/kernels.hpp"

namespace ecaml {

Semimetric Semimetric::power(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("power semimetric needs 0 < q < 1");
  return {Kind::power, q};
}

double Semimetric::operator()(std::span<const double> x, std::span<const double> y) const {
  if (x.size() != y.size()) throw ShapeError("semimetric arguments differ in dimension");
  const double sq = kernels::squared_distance(x, y);
  switch (kind) {
    case Kind::squared_euclidean:
      return sq;
    case Kind::euclidean:
      return std::sqrt(sq);
    case Kind::power:
      return std::pow(sq, q);
  }
  return sq;
}

double semimetric_eval(const Semimetric& rho, std::span<const double> x, std::span<const double> y) {
  return rho(x, y);
}

double kernel_eval(const Kernel& kernel, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("kernel arguments differ in dimension");
  if (std::holds_alternative<LinearKernel>(kernel)) return kernels::dot(x, y);
  const auto& k = std::get<DistanceInducedKernel>(kernel);
  if (k.center.size() != x.size()) throw ShapeError("kernel center differs in dimension");
  return 0.5 * (k.rho(x, k.center) + k.rho(y, k.center) - k.rho(x, y));
}

namespace {

void check_sets(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0 || y.rows() == 0) throw PreconditionError("divergence needs non-empty sets");
  if (x.cols() != y.cols()) throw ShapeError("sets differ in dimension");
}

template <class F>
double mean_over_pairs(const Matrix& a, const Matrix& b, F&& f) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) sum += f(a.row(i), b.row(j));
  }
  return sum / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

std::vector<double> column_mean(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) kernels::axpy(1.0 / static_cast<double>(m.rows()), m.row(i), mean);
  return mean;
}

}  // namespace

double ged(const Matrix& x, const Matrix& y, const Semimetric& rho) {
  check_sets(x, y);
  const double cross = mean_over_pairs(x, y, rho);
  const double within_x = mean_over_pairs(x, x, rho);
  const double within_y = mean_over_pairs(y, y, rho);
  return 2.0 * cross - within_x - within_y;
}

double mmd_sq(const Matrix& x, const Matrix& y, const Kernel& kernel) {
  check_sets(x, y);
  auto k = [&](std::span<const double> a, std::span<const double> b) { return kernel_eval(kernel, a, b); };
  const double value = mean_over_pairs(x, x, k) + mean_over_pairs(y, y, k) - 2.0 * mean_over_pairs(x, y, k);
  if (std::holds_alternative<LinearKernel>(kernel)) {
    // Linear kernel: the mean embeddings are the sample means.
    const auto mx = column_mean(x);
    const auto my = column_mean(y);
    const double closed = kernels::squared_distance(mx, my);
    if (std::abs(closed - value) > 1e-8 * (1.0 + std::abs(closed))) {
      throw std::logic_error("linear-kernel MMD disagrees with the mean-difference form");
    }
  }
  return value;
}

Matrix distance_induced_kernel_gram(const Matrix& points, const SemimetricFn& rho, std::span<const double> center) {
  if (center.size() != points.cols()) throw ShapeError("kernel center differs in dimension");
  const std::size_t n = points.rows();
  std::vector<double> to_center(n);
  for (std::size_t i = 0; i < n; ++i) to_center[i] = rho(points.row(i), center);
  Matrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    gram(i, i) = 0.5 * (2.0 * to_center[i] - rho(points.row(i), points.row(i)));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (to_center[i] + to_center[j] - rho(points.row(i), points.row(j)));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  return gram;
}

Matrix distance_induced_kernel_gram(const Matrix& points, const Semimetric& rho, std::span<const double> center) {
  return distance_induced_kernel_gram(points, SemimetricFn(rho), center);
}

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.rows() != symmetric.cols()) throw ShapeError("eigenvalues need a square matrix");
  if (symmetric.rows() == 0) throw ShapeError("eigenvalues of an empty matrix");
  const auto n = static_cast<Eigen::Index>(symmetric.rows());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(symmetric.data(), n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue decomposition failed");
  return solver.eigenvalues().minCoeff();
}

bool is_positive_semidefinite(const Matrix& symmetric) {
  double max_abs = 0.0;
  for (double v : symmetric.flat()) max_abs = std::max(max_abs, std::abs(v));
  return min_eigenvalue(symmetric) >= -kInequalityTolerance * std::max(max_abs, 1.0);
}

double negative_type_witness(const Matrix& points, std::span<const double> alphas, const SemimetricFn& rho) {
  if (alphas.size() != points.rows()) throw PreconditionError("need one weight per point");
  double total = 0.0;
  for (double a : alphas) total += a;
  if (std::abs(total) > 1e-12) throw PreconditionError("negative-type weights must sum to zero");
  double sum = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t j = 0; j < points.rows(); ++j) sum += alphas[i] * alphas[j] * rho(points.row(i), points.row(j));
  }
  return sum;
}

double negative_type_witness(const Matrix& points, std::span<const double> alphas, const Semimetric& rho) {
  return negative_type_witness(points, alphas, SemimetricFn(rho));
}

double squared_euclidean_witness_closed_form(const Matrix& points, std::span<const double> alphas) {
  if (alphas.size() != points.rows()) throw PreconditionError("need one weight per point");
  std::vector<double> combo(points.cols(), 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) kernels::axpy(alphas[i], points.row(i), combo);
  return -2.0 * kernels::squared_norm(combo);
}

GedBoundCheck check_ec_bounds_ged(const Matrix& x, const Matrix& y) {
  GedBoundCheck c;
  c.ec = energy_confusion_value(x, y);
  c.half_ged = 0.5 * ged(x, y, Semimetric::squared_euclidean());
  c.holds = c.ec >= c.half_ged - kInequalityTolerance;
  return c;
}

MmdBoundCheck check_ec_bounds_mmd(const Matrix& x, const Matrix& y) {
  MmdBoundCheck c;
  c.ec = energy_confusion_value(x, y);
  c.mmd = mmd_sq(x, y, LinearKernel{});
  c.half_ged = 0.5 * ged(x, y, Semimetric::squared_euclidean());
  c.holds = c.ec >= c.mmd - kInequalityTolerance;
  c.equality_holds = std::abs(c.mmd - c.half_ged) <= kInequalityTolerance;
  return c;
}

}  // namespace ecaml
