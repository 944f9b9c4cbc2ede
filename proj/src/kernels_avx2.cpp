#include "hpfrac/kernels.hpp"

#if defined(HPFRAC_BUILD_AVX2)

#include <immintrin.h>

#include <cmath>

namespace hpfrac {

namespace {

// Vectorized pow(x, e) = exp2(e * log2(x)) for strictly positive finite x.
//
// log2: split x = 2^k * m with m in [sqrt(2)/2, sqrt(2)], then
//   log2(m) = (2 / ln 2) * atanh(z),  z = (m - 1) / (m + 1),
// summing the odd atanh series through z^17 (|z| <= 0.172, remainder < 1e-15).
//
// exp2: split y = n + f with |f| <= 1/2, evaluate exp(f * ln 2) by a degree-13
// Taylor polynomial (remainder < 1e-17) and attach 2^n through the exponent bits.
inline __m256d pow_pd(__m256d x, __m256d e) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);

  // Exponent and mantissa extraction.
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i exp_raw = _mm256_srli_epi64(bits, 52);
  const __m256i exp_mask = _mm256_set1_epi64x(0x7ff);
  const __m256i bias = _mm256_set1_epi64x(1023);
  __m256i k_i = _mm256_sub_epi64(_mm256_and_si256(exp_raw, exp_mask), bias);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000fffffffffffffLL);
  const __m256i one_bits = _mm256_castpd_si256(one);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

  // Normalize the mantissa into [sqrt(2)/2, sqrt(2)].
  const __m256d sqrt2 = _mm256_set1_pd(1.4142135623730951);
  const __m256d big = _mm256_cmp_pd(m, sqrt2, _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, half), big);
  // Convert k to double and bump where the mantissa was halved.
  // AVX2 lacks a 64-bit int to double conversion; the exponents are small, so
  // go through 32-bit lanes.
  const __m128i k_lo = _mm256_castsi256_si128(_mm256_permutevar8x32_epi32(
      k_i, _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0)));
  __m256d k = _mm256_cvtepi32_pd(k_lo);
  k = _mm256_blendv_pd(k, _mm256_add_pd(k, one), big);

  const __m256d z = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d z2 = _mm256_mul_pd(z, z);
  __m256d s = _mm256_set1_pd(1.0 / 17.0);
  s = _mm256_fmadd_pd(s, z2, _mm256_set1_pd(1.0 / 15.0));
  s = _mm256_fmadd_pd(s, z2, _mm256_set1_pd(1.0 / 13.0));
  s = _mm256_fmadd_pd(s, z2, _mm256_set1_pd(1.0 / 11.0));
  s = _mm256_fmadd_pd(s, z2, _mm256_set1_pd(1.0 / 9.0));
  s = _mm256_fmadd_pd(s, z2, _mm256_set1_pd(1.0 / 7.0));
  s = _mm256_fmadd_pd(s, z2, _mm256_set1_pd(1.0 / 5.0));
  s = _mm256_fmadd_pd(s, z2, _mm256_set1_pd(1.0 / 3.0));
  s = _mm256_fmadd_pd(s, z2, one);
  const __m256d two_over_ln2 = _mm256_set1_pd(2.8853900817779268);
  const __m256d log2x = _mm256_fmadd_pd(_mm256_mul_pd(z, s), two_over_ln2, k);

  // y = e * log2(x), then exp2.
  const __m256d y = _mm256_mul_pd(e, log2x);
  const __m256d n_d = _mm256_round_pd(y, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d f = _mm256_sub_pd(y, n_d);
  const __m256d t = _mm256_mul_pd(f, _mm256_set1_pd(0.6931471805599453));

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);  // 1/13!
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, t, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, t, half);
  p = _mm256_fmadd_pd(p, t, one);
  p = _mm256_fmadd_pd(p, t, one);

  // 2^n via exponent bits; n stays far from the clamp for kernel inputs.
  __m128i n_i32 = _mm256_cvtpd_epi32(n_d);
  n_i32 = _mm_max_epi32(n_i32, _mm_set1_epi32(-1000));
  n_i32 = _mm_min_epi32(n_i32, _mm_set1_epi32(1000));
  const __m256i n_i64 = _mm256_cvtepi32_epi64(n_i32);
  const __m256i pow2_bits = _mm256_slli_epi64(_mm256_add_epi64(n_i64, _mm256_set1_epi64x(1023)), 52);
  const __m256d pow2n = _mm256_castsi256_pd(pow2_bits);

  return _mm256_mul_pd(p, pow2n);
}

}  // namespace

void kernel_fill_avx2(const double* x1, const double* y1, const double* w1, int n1,
                      const double* x2, const double* y2, const double* w2, int n2, double expo,
                      double* out) {
  const __m256d e = _mm256_set1_pd(expo);
  for (int p = 0; p < n1; ++p) {
    const __m256d xp = _mm256_set1_pd(x1[p]);
    const __m256d yp = _mm256_set1_pd(y1[p]);
    const __m256d wp = _mm256_set1_pd(w1[p]);
    double* row = out + static_cast<std::size_t>(p) * n2;
    int r = 0;
    for (; r + 4 <= n2; r += 4) {
      const __m256d dx = _mm256_sub_pd(xp, _mm256_loadu_pd(x2 + r));
      const __m256d dy = _mm256_sub_pd(yp, _mm256_loadu_pd(y2 + r));
      const __m256d d2 = _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dx, dx));
      const __m256d kv = pow_pd(d2, e);
      const __m256d wr = _mm256_loadu_pd(w2 + r);
      _mm256_storeu_pd(row + r, _mm256_mul_pd(_mm256_mul_pd(wp, wr), kv));
    }
    for (; r < n2; ++r) {
      const double dx = x1[p] - x2[r];
      const double dy = y1[p] - y2[r];
      row[r] = w1[p] * w2[r] * std::pow(dx * dx + dy * dy, expo);
    }
  }
}

}  // namespace hpfrac

#endif  // HPFRAC_BUILD_AVX2
