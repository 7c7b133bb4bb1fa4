#include "facesync/simd/kernels.hpp"

#include <cstdlib>
#include <string>

namespace facesync::simd {

bool avx2_compiled() {
#if defined(FACESYNC_HAVE_AVX2)
  return true;
#else
  return false;
#endif
}

bool cpu_has_avx2() {
#if defined(FACESYNC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("FACESYNC_SIMD")) {
    if (std::string(env) == "scalar") return &scalar::table();
  }
#if defined(FACESYNC_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2::table();
#endif
  return &scalar::table();
}

const KernelTable*& current() {
  static const KernelTable* t = pick_default();
  return t;
}

}  // namespace

const KernelTable& active() { return *current(); }

bool select(std::string_view name) {
  if (name == "scalar") {
    current() = &scalar::table();
    return true;
  }
#if defined(FACESYNC_HAVE_AVX2)
  if (name == "avx2" && cpu_has_avx2()) {
    current() = &avx2::table();
    return true;
  }
#endif
  return false;
}

}  // namespace facesync::simd
