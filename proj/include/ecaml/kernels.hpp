#pragma once

// Vector kernels behind every inner loop in the library: dot products,
// squared distances and axpy. A scalar reference implementation is always
// present; SIMD variants (AVX2+FMA on x86-64, NEON on AArch64) are compiled
// when the toolchain supports them and picked at runtime.
//
// The active table is chosen once per process, so a run is bit-reproducible
// on a given machine. Set ECAML_KERNELS=scalar (or avx2, neon) to override.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace ecaml::kernels {

struct Table {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const Table& scalar_table() noexcept;

// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const Table* avx2_table() noexcept;
const Table* neon_table() noexcept;

// Every table usable on this machine, scalar first.
std::vector<const Table*> available_tables();

// Looks up a table by name; throws ConfigError if unknown or unavailable.
const Table& table_by_name(std::string_view name);

const Table& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline double squared_norm(std::span<const double> a) {
  return active().dot(a.data(), a.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace ecaml::kernels
