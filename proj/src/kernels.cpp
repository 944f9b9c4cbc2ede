#include "hpfrac/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace hpfrac {

void kernel_fill_scalar(const double* x1, const double* y1, const double* w1, int n1,
                        const double* x2, const double* y2, const double* w2, int n2, double expo,
                        double* out) {
  for (int p = 0; p < n1; ++p) {
    const double xp = x1[p], yp = y1[p], wp = w1[p];
    double* row = out + static_cast<std::size_t>(p) * n2;
    for (int r = 0; r < n2; ++r) {
      const double dx = xp - x2[r];
      const double dy = yp - y2[r];
      row[r] = wp * w2[r] * std::pow(dx * dx + dy * dy, expo);
    }
  }
}

namespace {

bool cpu_has_avx2() {
#if defined(HPFRAC_BUILD_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

SimdMode env_mode() {
  const char* env = std::getenv("HPFRAC_SIMD");
  if (env == nullptr) return SimdMode::Auto;
  const std::string v(env);
  if (v == "auto" || v.empty()) return SimdMode::Auto;
  if (v == "scalar") return SimdMode::Scalar;
  if (v == "avx2") return SimdMode::Avx2;
  throw std::runtime_error("HPFRAC_SIMD must be 'scalar', 'avx2', or 'auto', got '" + v + "'");
}

}  // namespace

KernelFillFn select_kernel_fill(SimdMode mode) {
  if (mode == SimdMode::Auto) mode = env_mode();
  switch (mode) {
    case SimdMode::Scalar: return kernel_fill_scalar;
    case SimdMode::Avx2:
#if defined(HPFRAC_BUILD_AVX2)
      if (cpu_has_avx2()) return kernel_fill_avx2;
      throw std::runtime_error("AVX2 kernel requested but this CPU does not support AVX2");
#else
      throw std::runtime_error("AVX2 kernel requested but this build has no AVX2 variant");
#endif
    case SimdMode::Auto: break;
  }
#if defined(HPFRAC_BUILD_AVX2)
  if (cpu_has_avx2()) return kernel_fill_avx2;
#endif
  return kernel_fill_scalar;
}

std::string active_kernel_name() {
  return select_kernel_fill() == kernel_fill_scalar ? "scalar" : "avx2";
}

}  // namespace hpfrac
