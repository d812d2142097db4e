#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "binaural/signal.hpp"

namespace binaural {

/// Autoregressive model in prediction form:
///   x(n) = sum_{i=1..P} coefficients[i-1] * x(n-i) + e(n),  Var e = excitation_variance.
/// The inverse filter is 1 - sum_i coefficients[i-1] z^-i; see inverse_filter().
struct ArModel {
  std::vector<double> coefficients;
  double excitation_variance = 1.0;

  std::size_t order() const noexcept { return coefficients.size(); }

  /// [1, -a_1, ..., -a_P]
  std::vector<double> inverse_filter() const;

  friend bool operator==(const ArModel&, const ArModel&) = default;
};

/// Line spectral frequencies, strictly increasing in (0, pi).
struct LsfVector {
  std::vector<double> frequencies;

  std::size_t order() const noexcept { return frequencies.size(); }

  friend bool operator==(const LsfVector&, const LsfVector&) = default;
};

bool is_valid_lsf(std::span<const double> lsf) noexcept;

struct LevinsonTrace {
  ArModel model;
  std::vector<double> reflection;         // k_1..k_P
  std::vector<double> prediction_errors;  // E_0..E_P
};

/// Order-P autocorrelation-method solution for r(0..P).
/// Throws std::invalid_argument if r(0) <= 0 and NumericalError when a
/// reflection coefficient reaches the unit circle.
ArModel levinson_durbin(std::span<const double> autocorr);
LevinsonTrace levinson_durbin_trace(std::span<const double> autocorr);

/// Step-up recursion: prediction-form coefficients from reflection
/// coefficients (all |k| < 1 gives a stable model).
std::vector<double> reflection_to_ar(std::span<const double> reflection);

/// Reflection coefficients of the inverse filter (step-down recursion).
/// Throws std::invalid_argument if any |k| >= 1, i.e. the model is unstable.
std::vector<double> ar_to_reflection(std::span<const double> coefficients);

bool is_stable(std::span<const double> coefficients) noexcept;

/// LSFs from the roots of the symmetric and antisymmetric sum/difference
/// polynomials on the unit circle: grid scan plus bisection.
LsfVector ar_to_lsf(const ArModel& model);

/// Inverse of ar_to_lsf. The returned model has excitation_variance = 1.
ArModel lsf_to_ar(const LsfVector& lsf);

/// Envelope 1/|A(k)|^2 on a K-point grid, A(k) being the K-point DFT of the
/// inverse filter. Excitation variance is not applied.
Spectrum ar_envelope(const ArModel& model, std::size_t dft_len);

}  // namespace binaural
