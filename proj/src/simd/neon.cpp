#include "binaural/simd.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <numbers>

namespace binaural::simd {
namespace {

MuSums mu_sums_neon(const double* ps, const double* pw, const double* obs, double sd, double sv,
                    std::size_t n) {
  const float64x2_t vsd = vdupq_n_f64(sd);
  const float64x2_t vsv = vdupq_n_f64(sv);
  float64x2_t num_s = vdupq_n_f64(0.0);
  float64x2_t den_s = vdupq_n_f64(0.0);
  float64x2_t num_w = vdupq_n_f64(0.0);
  float64x2_t den_w = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const float64x2_t s = vld1q_f64(ps + k);
    const float64x2_t w = vld1q_f64(pw + k);
    const float64x2_t o = vld1q_f64(obs + k);
    const float64x2_t inv = vdivq_f64(vdupq_n_f64(1.0), vfmaq_f64(vmulq_f64(w, vsv), s, vsd));
    const float64x2_t q = vmulq_f64(vmulq_f64(o, inv), inv);
    num_s = vfmaq_f64(num_s, s, q);
    den_s = vfmaq_f64(den_s, s, inv);
    num_w = vfmaq_f64(num_w, w, q);
    den_w = vfmaq_f64(den_w, w, inv);
  }
  MuSums out{vaddvq_f64(num_s), vaddvq_f64(den_s), vaddvq_f64(num_w), vaddvq_f64(den_w)};
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

double ratio_sum_neon(const double* obs, const double* model, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) acc = vaddq_f64(acc, vdivq_f64(vld1q_f64(obs + k), vld1q_f64(model + k)));
  double total = vaddvq_f64(acc);
  for (; k < n; ++k) total += obs[k] / model[k];
  return total;
}

double log_sum_neon(const double* x, std::size_t n) {
  // NEON has no cheap exponent split for f64 lanes here; defer to frexp.
  double mant = 1.0;
  long long exp_sum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    int e = 0;
    mant *= std::frexp(x[k], &e);
    exp_sum += e;
    if ((k & 15) == 15) {
      mant = std::frexp(mant, &e);
      exp_sum += e;
    }
  }
  return std::log(mant) + static_cast<double>(exp_sum) * std::numbers::ln2;
}

void mix2_neon(const double* ps, double sd, const double* pw, double sv, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    vst1q_f64(out + k, vfmaq_n_f64(vmulq_n_f64(vld1q_f64(pw + k), sv), vld1q_f64(ps + k), sd));
  }
  for (; k < n; ++k) out[k] = ps[k] * sd + pw[k] * sv;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) vst1q_f64(y + k, vfmaq_n_f64(vld1q_f64(y + k), vld1q_f64(x + k), a));
  for (; k < n; ++k) y[k] += a * x[k];
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) acc = vfmaq_f64(acc, vld1q_f64(x + k), vld1q_f64(y + k));
  double total = vaddvq_f64(acc);
  for (; k < n; ++k) total += x[k] * y[k];
  return total;
}

std::complex<double> cdot_neon(const std::complex<double>* a, const std::complex<double>* b,
                               std::size_t n) {
  const auto* pa = reinterpret_cast<const double*>(a);
  const auto* pb = reinterpret_cast<const double*>(b);
  float64x2_t re = vdupq_n_f64(0.0);
  float64x2_t im = vdupq_n_f64(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const float64x2_t va = vld1q_f64(pa + 2 * k);
    const float64x2_t vb = vld1q_f64(pb + 2 * k);
    re = vfmaq_f64(re, va, vb);
    im = vfmaq_f64(im, va, vextq_f64(vb, vb, 1));
  }
  return {vgetq_lane_f64(re, 0) + vgetq_lane_f64(re, 1),
          vgetq_lane_f64(im, 0) - vgetq_lane_f64(im, 1)};
}

void caxpy_neon(std::complex<double> a, const std::complex<double>* x, std::complex<double>* y,
                std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double xr = x[k].real();
    const double xi = x[k].imag();
    y[k] = {y[k].real() + a.real() * xr - a.imag() * xi, y[k].imag() + a.real() * xi + a.imag() * xr};
  }
}

}  // namespace

namespace detail {
const KernelTable kNeonKernels = {
    Isa::Neon, mu_sums_neon, ratio_sum_neon, log_sum_neon, mix2_neon, axpy_neon,
    dot_neon,  cdot_neon,    caxpy_neon,
};
}  // namespace detail

}  // namespace binaural::simd

#endif
