#include "binaural/simd.hpp"

#include <cmath>
#include <numbers>

namespace binaural::simd {
namespace {

MuSums mu_sums_scalar(const double* ps, const double* pw, const double* obs, double sd, double sv,
                      std::size_t n) {
  MuSums s;
  for (std::size_t k = 0; k < n; ++k) {
    const double inv = 1.0 / (ps[k] * sd + pw[k] * sv);
    const double w = obs[k] * inv * inv;
    s.num_s += ps[k] * w;
    s.den_s += ps[k] * inv;
    s.num_w += pw[k] * w;
    s.den_w += pw[k] * inv;
  }
  return s;
}

double ratio_sum_scalar(const double* obs, const double* model, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += obs[k] / model[k];
  return acc;
}

// Mantissas are multiplied and exponents summed; frexp keeps the running
// product in [0.5, 1) so it never under- or overflows.
double log_sum_scalar(const double* x, std::size_t n) {
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

void mix2_scalar(const double* ps, double sd, const double* pw, double sv, double* out,
                 std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = ps[k] * sd + pw[k] * sv;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += x[k] * y[k];
  return acc;
}

std::complex<double> cdot_scalar(const std::complex<double>* a, const std::complex<double>* b,
                                 std::size_t n) {
  double re = 0.0;
  double im = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    re += a[k].real() * b[k].real() + a[k].imag() * b[k].imag();
    im += a[k].real() * b[k].imag() - a[k].imag() * b[k].real();
  }
  return {re, im};
}

void caxpy_scalar(std::complex<double> a, const std::complex<double>* x, std::complex<double>* y,
                  std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double xr = x[k].real();
    const double xi = x[k].imag();
    y[k] = {y[k].real() + a.real() * xr - a.imag() * xi, y[k].imag() + a.real() * xi + a.imag() * xr};
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarKernels = {
    Isa::Scalar, mu_sums_scalar, ratio_sum_scalar, log_sum_scalar, mix2_scalar, axpy_scalar,
    dot_scalar,  cdot_scalar,    caxpy_scalar,
};
}  // namespace detail

}  // namespace binaural::simd
