#include "f2/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace f2::kernels {

#if defined(F2_BUILD_AVX2)
const Dispatch* avx2_table_impl();
#endif

const Dispatch* avx2_table() {
#if defined(F2_BUILD_AVX2)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2_table_impl();
#endif
  return nullptr;
}

namespace {

const Dispatch* resolve() {
  const char* pick = std::getenv("F2_KERNELS");
  if (pick != nullptr) {
    if (std::strcmp(pick, "scalar") == 0) return scalar_table();
    if (std::strcmp(pick, "avx2") == 0 && avx2_table() != nullptr)
      return avx2_table();
  }
  if (const Dispatch* v = avx2_table()) return v;
  return scalar_table();
}

}  // namespace

const Dispatch& K() {
  static const Dispatch* active = resolve();
  return *active;
}

const char* active_variant() {
  return &K() == scalar_table() ? "scalar" : "avx2";
}

}  // namespace f2::kernels
