#include "binaural/lpc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "binaural/errors.hpp"

namespace binaural {

std::vector<double> ArModel::inverse_filter() const {
  std::vector<double> a(coefficients.size() + 1);
  a[0] = 1.0;
  for (std::size_t i = 0; i < coefficients.size(); ++i) a[i + 1] = -coefficients[i];
  return a;
}

bool is_valid_lsf(std::span<const double> lsf) noexcept {
  double prev = 0.0;
  for (double w : lsf) {
    if (!std::isfinite(w) || w <= prev || w >= std::numbers::pi) return false;
    prev = w;
  }
  return true;
}

LevinsonTrace levinson_durbin_trace(std::span<const double> r) {
  if (r.empty()) throw std::invalid_argument("autocorrelation sequence is empty");
  if (!(r[0] > 0.0)) throw std::invalid_argument("autocorrelation r(0) must be positive");
  const std::size_t order = r.size() - 1;

  LevinsonTrace out;
  out.prediction_errors.reserve(order + 1);
  out.reflection.reserve(order);
  std::vector<double> a(order, 0.0);
  std::vector<double> prev(order, 0.0);
  double err = r[0];
  out.prediction_errors.push_back(err);

  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc -= a[j - 1] * r[i - j];
    const double k = acc / err;
    if (!(std::abs(k) < 1.0)) {
      throw NumericalError("Levinson-Durbin: reflection coefficient " + std::to_string(k) +
                           " at order " + std::to_string(i) + " is not inside the unit circle");
    }
    prev.assign(a.begin(), a.end());
    a[i - 1] = k;
    for (std::size_t j = 1; j < i; ++j) a[j - 1] = prev[j - 1] - k * prev[i - j - 1];
    err *= (1.0 - k * k);
    out.reflection.push_back(k);
    out.prediction_errors.push_back(err);
  }
  out.model = ArModel{std::move(a), err};
  return out;
}

ArModel levinson_durbin(std::span<const double> autocorr) {
  return levinson_durbin_trace(autocorr).model;
}

std::vector<double> reflection_to_ar(std::span<const double> reflection) {
  std::vector<double> a;
  a.reserve(reflection.size());
  for (std::size_t i = 0; i < reflection.size(); ++i) {
    const double k = reflection[i];
    std::vector<double> next(i + 1);
    for (std::size_t j = 0; j < i; ++j) next[j] = a[j] - k * a[i - 1 - j];
    next[i] = k;
    a = std::move(next);
  }
  return a;
}

std::vector<double> ar_to_reflection(std::span<const double> coefficients) {
  std::vector<double> a(coefficients.begin(), coefficients.end());
  std::vector<double> k(a.size());
  for (std::size_t i = a.size(); i-- > 0;) {
    const double ki = a[i];
    if (!(std::abs(ki) < 1.0)) {
      throw std::invalid_argument("AR model is not stable (|k_" + std::to_string(i + 1) +
                                  "| >= 1)");
    }
    k[i] = ki;
    const double denom = 1.0 - ki * ki;
    std::vector<double> lower(i);
    for (std::size_t j = 0; j < i; ++j) lower[j] = (a[j] + ki * a[i - 1 - j]) / denom;
    a = std::move(lower);
  }
  return k;
}

bool is_stable(std::span<const double> coefficients) noexcept {
  try {
    ar_to_reflection(coefficients);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

namespace {

// e^{i w (P+1)/2} P(e^{iw}) for the symmetric sum polynomial is real; for the
// antisymmetric difference polynomial it is i times a real function. Both are
// evaluated as trigonometric sums over the first half of the coefficients.
struct LsfPolys {
  std::vector<double> sum;   // p_k = alpha_k + alpha_{P+1-k}
  std::vector<double> diff;  // q_k = alpha_k - alpha_{P+1-k}
  double half_degree;        // (P+1)/2
};

LsfPolys lsf_polys(const std::vector<double>& alpha) {
  const std::size_t p = alpha.size() - 1;
  LsfPolys polys;
  polys.half_degree = static_cast<double>(p + 1) / 2.0;
  polys.sum.resize(p + 2);
  polys.diff.resize(p + 2);
  for (std::size_t k = 0; k <= p + 1; ++k) {
    const double lo = k <= p ? alpha[k] : 0.0;
    const double hi = (p + 1 - k) <= p ? alpha[p + 1 - k] : 0.0;
    polys.sum[k] = lo + hi;
    polys.diff[k] = lo - hi;
  }
  return polys;
}

// sum_k c_k e^{i (h - k) w}, stepping the phasor by e^{-iw}.
std::complex<double> phasor_sum(const std::vector<double>& c, double h, double w) {
  std::complex<double> z = std::polar(1.0, h * w);
  const std::complex<double> step = std::polar(1.0, -w);
  std::complex<double> acc = 0.0;
  for (double ck : c) {
    acc += ck * z;
    z *= step;
  }
  return acc;
}

double eval_sum(const LsfPolys& polys, double w) {
  return phasor_sum(polys.sum, polys.half_degree, w).real();
}

double eval_diff(const LsfPolys& polys, double w) {
  return phasor_sum(polys.diff, polys.half_degree, w).imag();
}

template <typename Fn>
double bisect(Fn&& f, double lo, double hi, double flo) {
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

template <typename Fn>
void scan_roots(Fn&& f, std::size_t grid, std::vector<double>& roots) {
  const double step = std::numbers::pi / static_cast<double>(grid);
  // Both grid ends sit on trivial roots (or near them) and are excluded.
  double prev_w = step * 0.5;
  double prev_f = f(prev_w);
  for (std::size_t g = 1; g < grid; ++g) {
    const double w = (static_cast<double>(g) + 0.5) * step;
    const double fw = f(w);
    if ((fw < 0.0) != (prev_f < 0.0)) roots.push_back(bisect(f, prev_w, w, prev_f));
    prev_w = w;
    prev_f = fw;
  }
}

// Multiply `poly` (coefficients of z^0, z^-1, ...) by (1 + c1 z^-1 + c2 z^-2).
void mul_quadratic(std::vector<double>& poly, double c1, double c2) {
  std::vector<double> out(poly.size() + 2, 0.0);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    out[i] += poly[i];
    out[i + 1] += c1 * poly[i];
    out[i + 2] += c2 * poly[i];
  }
  poly = std::move(out);
}

void mul_linear(std::vector<double>& poly, double c1) {
  std::vector<double> out(poly.size() + 1, 0.0);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    out[i] += poly[i];
    out[i + 1] += c1 * poly[i];
  }
  poly = std::move(out);
}

}  // namespace

LsfVector ar_to_lsf(const ArModel& model) {
  const std::size_t p = model.order();
  if (p == 0) return {};
  if (!is_stable(model.coefficients)) {
    throw std::invalid_argument("ar_to_lsf: model is not stable");
  }
  const LsfPolys polys = lsf_polys(model.inverse_filter());
  auto fp = [&](double w) { return eval_sum(polys, w); };
  auto fq = [&](double w) { return eval_diff(polys, w); };

  // 4096 points resolve typical models; nearly coincident pairs (poles close
  // to the unit circle) can share a cell, so the grid is refined until all P
  // roots are separated.
  for (std::size_t grid = 4096; grid <= (std::size_t{1} << 22); grid *= 8) {
    std::vector<double> roots;
    roots.reserve(p);
    scan_roots(fp, grid, roots);
    scan_roots(fq, grid, roots);
    if (roots.size() == p) {
      std::sort(roots.begin(), roots.end());
      if (is_valid_lsf(roots)) return LsfVector{std::move(roots)};
    }
  }
  throw NumericalError("ar_to_lsf: could not isolate " + std::to_string(p) + " line spectral roots");
}

ArModel lsf_to_ar(const LsfVector& lsf) {
  const std::size_t p = lsf.order();
  if (!is_valid_lsf(lsf.frequencies)) {
    throw std::invalid_argument("lsf_to_ar: LSFs must be strictly increasing inside (0, pi)");
  }
  if (p == 0) return ArModel{{}, 1.0};

  // Odd-indexed (1st, 3rd, ...) frequencies are roots of the sum polynomial,
  // even-indexed ones of the difference polynomial.
  std::vector<double> sum{1.0};
  std::vector<double> diff{1.0};
  for (std::size_t i = 0; i < p; ++i) {
    const double c1 = -2.0 * std::cos(lsf.frequencies[i]);
    mul_quadratic(i % 2 == 0 ? sum : diff, c1, 1.0);
  }
  if (p % 2 == 0) {
    mul_linear(sum, 1.0);    // root at z = -1
    mul_linear(diff, -1.0);  // root at z = 1
  } else {
    mul_quadratic(diff, 0.0, -1.0);  // roots at z = +-1
  }
  ArModel model;
  model.coefficients.resize(p);
  for (std::size_t i = 1; i <= p; ++i) model.coefficients[i - 1] = -0.5 * (sum[i] + diff[i]);
  model.excitation_variance = 1.0;
  return model;
}

Spectrum ar_envelope(const ArModel& model, std::size_t dft_len) {
  if (dft_len < model.order() + 1) {
    throw std::invalid_argument("ar_envelope: DFT length must exceed model order");
  }
  const std::vector<double> alpha = model.inverse_filter();
  const ComplexVector A = dft(alpha, dft_len);
  Spectrum env;
  env.bins.resize(dft_len);
  for (std::size_t k = 0; k < dft_len; ++k) env.bins[k] = 1.0 / std::norm(A[k]);
  return env;
}

}  // namespace binaural
