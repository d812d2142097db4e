#include "binaural/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <numbers>

#define BINAURAL_AVX2 __attribute__((target("avx2,fma")))

namespace binaural::simd {
namespace {

BINAURAL_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

BINAURAL_AVX2 MuSums mu_sums_avx2(const double* ps, const double* pw, const double* obs, double sd,
                                  double sv, std::size_t n) {
  const __m256d vsd = _mm256_set1_pd(sd);
  const __m256d vsv = _mm256_set1_pd(sv);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d num_s = _mm256_setzero_pd();
  __m256d den_s = _mm256_setzero_pd();
  __m256d num_w = _mm256_setzero_pd();
  __m256d den_w = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d s = _mm256_loadu_pd(ps + k);
    const __m256d w = _mm256_loadu_pd(pw + k);
    const __m256d o = _mm256_loadu_pd(obs + k);
    const __m256d inv = _mm256_div_pd(one, _mm256_fmadd_pd(s, vsd, _mm256_mul_pd(w, vsv)));
    const __m256d q = _mm256_mul_pd(_mm256_mul_pd(o, inv), inv);
    num_s = _mm256_fmadd_pd(s, q, num_s);
    den_s = _mm256_fmadd_pd(s, inv, den_s);
    num_w = _mm256_fmadd_pd(w, q, num_w);
    den_w = _mm256_fmadd_pd(w, inv, den_w);
  }
  MuSums out{hsum(num_s), hsum(den_s), hsum(num_w), hsum(den_w)};
  for (; k < n; ++k) {
    const double inv = 1.0 / (ps[k] * sd + pw[k] * sv);
    const double q = obs[k] * inv * inv;
    out.num_s += ps[k] * q;
    out.den_s += ps[k] * inv;
    out.num_w += pw[k] * q;
    out.den_w += pw[k] * inv;
  }
  return out;
}

BINAURAL_AVX2 double ratio_sum_avx2(const double* obs, const double* model, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    acc = _mm256_add_pd(acc, _mm256_div_pd(_mm256_loadu_pd(obs + k), _mm256_loadu_pd(model + k)));
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += obs[k] / model[k];
  return total;
}

// Adds the biased exponent of each lane to e and returns the mantissas in [1, 2).
BINAURAL_AVX2 inline __m256d split_exponent(__m256d v, __m256i& e) {
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  const __m256i bits = _mm256_castpd_si256(v);
  e = _mm256_add_epi64(e, _mm256_srli_epi64(bits, 52));
  return _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));
}

// Mantissa products are renormalized every 16 steps (bounded by 2^16).
BINAURAL_AVX2 double log_sum_avx2(const double* x, std::size_t n) {
  __m256d prod = _mm256_set1_pd(1.0);
  __m256i exps = _mm256_setzero_si256();
  std::size_t k = 0;
  std::size_t blocks = 0;
  std::size_t lanes_used = 0;
  for (; k + 4 <= n; k += 4) {
    prod = _mm256_mul_pd(prod, split_exponent(_mm256_loadu_pd(x + k), exps));
    lanes_used += 4;
    if (++blocks == 16) {
      blocks = 0;
      __m256i e = _mm256_setzero_si256();
      prod = split_exponent(prod, e);
      // prod's own biased exponent counts as one more term per lane
      exps = _mm256_add_epi64(exps, e);
      lanes_used += 4;
    }
  }
  alignas(32) double p[4];
  alignas(32) long long e[4];
  _mm256_store_pd(p, prod);
  _mm256_store_si256(reinterpret_cast<__m256i*>(e), exps);
  // every split added a bias of 1023
  long long exp_sum = e[0] + e[1] + e[2] + e[3] - 1023LL * static_cast<long long>(lanes_used);
  double total = std::log(p[0] * p[1]) + std::log(p[2] * p[3]);
  for (; k < n; ++k) total += std::log(x[k]);
  return total + static_cast<double>(exp_sum) * std::numbers::ln2;
}

BINAURAL_AVX2 void mix2_avx2(const double* ps, double sd, const double* pw, double sv, double* out,
                             std::size_t n) {
  const __m256d vsd = _mm256_set1_pd(sd);
  const __m256d vsv = _mm256_set1_pd(sv);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d r = _mm256_fmadd_pd(_mm256_loadu_pd(ps + k), vsd,
                                      _mm256_mul_pd(_mm256_loadu_pd(pw + k), vsv));
    _mm256_storeu_pd(out + k, r);
  }
  for (; k < n; ++k) out[k] = ps[k] * sd + pw[k] * sv;
}

BINAURAL_AVX2 void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += a * x[k];
}

BINAURAL_AVX2 double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k + 4), _mm256_loadu_pd(y + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) total += x[k] * y[k];
  return total;
}

// Complex arrays are interleaved (re, im); one __m256d holds two values.
BINAURAL_AVX2 std::complex<double> cdot_avx2(const std::complex<double>* a,
                                             const std::complex<double>* b, std::size_t n) {
  const auto* pa = reinterpret_cast<const double*>(a);
  const auto* pb = reinterpret_cast<const double*>(b);
  __m256d re = _mm256_setzero_pd();  // ar*br, ai*bi
  __m256d im = _mm256_setzero_pd();  // ar*bi, ai*br (sign fixed below)
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * k);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * k);
    re = _mm256_fmadd_pd(va, vb, re);
    im = _mm256_fmadd_pd(va, _mm256_permute_pd(vb, 0x5), im);
  }
  alignas(32) double r[4];
  alignas(32) double i[4];
  _mm256_store_pd(r, re);
  _mm256_store_pd(i, im);
  double sre = (r[0] + r[1]) + (r[2] + r[3]);
  double sim = (i[0] - i[1]) + (i[2] - i[3]);
  for (; k < n; ++k) {
    sre += a[k].real() * b[k].real() + a[k].imag() * b[k].imag();
    sim += a[k].real() * b[k].imag() - a[k].imag() * b[k].real();
  }
  return {sre, sim};
}

BINAURAL_AVX2 void caxpy_avx2(std::complex<double> a, const std::complex<double>* x,
                              std::complex<double>* y, std::size_t n) {
  const auto* px = reinterpret_cast<const double*>(x);
  auto* py = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set1_pd(a.imag());
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vx = _mm256_loadu_pd(px + 2 * k);
    const __m256d swapped = _mm256_permute_pd(vx, 0x5);  // (xi, xr)
    // (ar*xr - ai*xi, ar*xi + ai*xr)
    const __m256d prod = _mm256_fmaddsub_pd(ar, vx, _mm256_mul_pd(ai, swapped));
    _mm256_storeu_pd(py + 2 * k, _mm256_add_pd(_mm256_loadu_pd(py + 2 * k), prod));
  }
  for (; k < n; ++k) {
    const double xr = x[k].real();
    const double xi = x[k].imag();
    y[k] = {y[k].real() + a.real() * xr - a.imag() * xi, y[k].imag() + a.real() * xi + a.imag() * xr};
  }
}

}  // namespace

namespace detail {
const KernelTable kAvx2Kernels = {
    Isa::Avx2, mu_sums_avx2, ratio_sum_avx2, log_sum_avx2, mix2_avx2, axpy_avx2,
    dot_avx2,  cdot_avx2,    caxpy_avx2,
};
}  // namespace detail

}  // namespace binaural::simd

#endif
