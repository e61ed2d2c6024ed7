#pragma once

// Statistical distances between finite point sets (rows of a Matrix, each
// with uniform weight): generalized energy distance, squared MMD, the
// distance-induced kernel, negative-type witnesses, and the two inequalities
// that bound both divergences by the energy-confusion term.
//
// Every expectation is a V-statistic: all ordered pairs, self-pairs included.

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "ecaml/matrix.hpp"

namespace ecaml {

struct Semimetric {
  enum class Kind { squared_euclidean, euclidean, power };

  Kind kind = Kind::squared_euclidean;
  // Exponent applied to the squared Euclidean distance when kind == power.
  double q = 1.0;

  static Semimetric squared_euclidean() { return {Kind::squared_euclidean, 1.0}; }
  static Semimetric euclidean() { return {Kind::euclidean, 0.5}; }
  // Throws ConfigError unless 0 < q < 1.
  static Semimetric power(double q);

  double operator()(std::span<const double> x, std::span<const double> y) const;
};

using SemimetricFn = std::function<double(std::span<const double>, std::span<const double>)>;

double semimetric_eval(const Semimetric& rho, std::span<const double> x, std::span<const double> y);

struct LinearKernel {};

struct DistanceInducedKernel {
  Semimetric rho;
  std::vector<double> center;
};

using Kernel = std::variant<LinearKernel, DistanceInducedKernel>;

double kernel_eval(const Kernel& kernel, std::span<const double> x, std::span<const double> y);

// 2 E rho(X, Y) - E rho(X, X') - E rho(Y, Y')
double ged(const Matrix& x, const Matrix& y, const Semimetric& rho);

// E k(X, X') + E k(Y, Y') - 2 E k(X, Y)
double mmd_sq(const Matrix& x, const Matrix& y, const Kernel& kernel);

// K[i][j] = (rho(z_i, z0) + rho(z_j, z0) - rho(z_i, z_j)) / 2
Matrix distance_induced_kernel_gram(const Matrix& points, const Semimetric& rho, std::span<const double> center);
Matrix distance_induced_kernel_gram(const Matrix& points, const SemimetricFn& rho, std::span<const double> center);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& symmetric);

// min eigenvalue >= -1e-9 * max|K|
bool is_positive_semidefinite(const Matrix& symmetric);

// sum_i sum_j a_i a_j rho(z_i, z_j) for zero-sum weights a. Throws
// PreconditionError unless |sum a| <= 1e-12 and sizes agree.
double negative_type_witness(const Matrix& points, std::span<const double> alphas, const Semimetric& rho);
double negative_type_witness(const Matrix& points, std::span<const double> alphas, const SemimetricFn& rho);

// -2 |sum_i a_i z_i|^2, the closed form of the squared-Euclidean witness.
double squared_euclidean_witness_closed_form(const Matrix& points, std::span<const double> alphas);

struct GedBoundCheck {
  double ec = 0.0;
  double half_ged = 0.0;
  bool holds = false;
};

// EC(X, Y) >= GED(X, Y) / 2 with squared Euclidean rho, tolerance 1e-9.
GedBoundCheck check_ec_bounds_ged(const Matrix& x, const Matrix& y);

struct MmdBoundCheck {
  double ec = 0.0;
  double mmd = 0.0;
  double half_ged = 0.0;
  bool holds = false;
  // |MMD^2(linear) - GED/2| <= 1e-9
  bool equality_holds = false;
};

// EC(X, Y) >= MMD^2(X, Y) with the linear kernel, tolerance 1e-9.
MmdBoundCheck check_ec_bounds_mmd(const Matrix& x, const Matrix& y);

inline constexpr double kInequalityTolerance = 1e-9;

}  // namespace ecaml
