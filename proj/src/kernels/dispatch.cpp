#include <cstdlib>
#include <string>

#include "ecaml/errors.hpp"
#include "ecaml/kernels.hpp"

namespace ecaml::kernels {

namespace detail {
#if defined(ECAML_HAVE_AVX2)
const Table& avx2_impl() noexcept;
#endif
#if defined(ECAML_HAVE_NEON)
const Table& neon_impl() noexcept;
#endif
}  // namespace detail

const Table* avx2_table() noexcept {
#if defined(ECAML_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &detail::avx2_impl() : nullptr;
#else
  return nullptr;
#endif
}

const Table* neon_table() noexcept {
#if defined(ECAML_HAVE_NEON)
  // Advanced SIMD is mandatory on AArch64.
  return &detail::neon_impl();
#else
  return nullptr;
#endif
}

std::vector<const Table*> available_tables() {
  std::vector<const Table*> out{&scalar_table()};
  if (const Table* t = avx2_table()) out.push_back(t);
  if (const Table* t = neon_table()) out.push_back(t);
  return out;
}

const Table& table_by_name(std::string_view name) {
  for (const Table* t : available_tables()) {
    if (name == t->name) return *t;
  }
  throw ConfigError("kernel variant '" + std::string(name) + "' is not available on this machine");
}

namespace {

const Table& select_active() {
  if (const char* env = std::getenv("ECAML_KERNELS"); env != nullptr && *env != '\0') {
    return table_by_name(env);
  }
  const auto tables = available_tables();
  return *tables.back();
}

}  // namespace

const Table& active() noexcept {
  static const Table* chosen = [] {
    try {
      return &select_active();
    } catch (const ConfigError&) {
      return &scalar_table();
    }
  }();
  return *chosen;
}

}  // namespace ecaml::kernels
