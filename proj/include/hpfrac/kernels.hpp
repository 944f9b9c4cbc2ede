#pragma once

#include <string>

namespace hpfrac {

// Weighted kernel matrix fill between two point sets:
//   out[p * n2 + r] = w1[p] * w2[r] * ((x1[p]-x2[r])^2 + (y1[p]-y2[r])^2)^expo
// with expo < 0; the points must be pairwise distinct. This is the hot inner loop
// of the far-field assembly.
using KernelFillFn = void (*)(const double* x1, const double* y1, const double* w1, int n1,
                              const double* x2, const double* y2, const double* w2, int n2,
                              double expo, double* out);

void kernel_fill_scalar(const double* x1, const double* y1, const double* w1, int n1,
                        const double* x2, const double* y2, const double* w2, int n2, double expo,
                        double* out);

#if defined(HPFRAC_BUILD_AVX2)
void kernel_fill_avx2(const double* x1, const double* y1, const double* w1, int n1,
                      const double* x2, const double* y2, const double* w2, int n2, double expo,
                      double* out);
#endif

enum class SimdMode { Auto, Scalar, Avx2 };

// Picks the kernel implementation. Auto consults the HPFRAC_SIMD environment
// variable ("scalar", "avx2", or "auto") and falls back to CPU detection.
// Requesting an unavailable implementation throws std::runtime_error.
KernelFillFn select_kernel_fill(SimdMode mode = SimdMode::Auto);

// Name of the implementation Auto resolves to ("scalar" or "avx2").
std::string active_kernel_name();

}  // namespace hpfrac
