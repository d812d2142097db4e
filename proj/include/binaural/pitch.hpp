#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "binaural/lpc.hpp"
#include "binaural/signal.hpp"

namespace binaural {

struct PitchInfo {
  double omega0 = 0.0;             // rad/sample; 0 when unvoiced
  std::size_t period = 0;          // round(2 pi / omega0) samples
  double voicing = 0.0;            // harmonic energy ratio, clamped to max_voicing
  std::size_t harmonic_order = 0;  // 0 = unvoiced

  bool voiced() const noexcept { return harmonic_order > 0; }
  double f0_hz(double sample_rate) const;
};

/// Per-ear complex gain applied to each harmonic: magnitude * e^{-i w delay}.
class DirectivityModel {
 public:
  /// Free field, source in the nose direction: unit gains on both ears.
  static DirectivityModel identity();
  /// Pure interaural delay (samples, may be fractional) relative to the left ear.
  static DirectivityModel pure_delay(double right_delay_samples);

  DirectivityModel& with_magnitudes(double left, double right);

  std::complex<double> left_gain(double omega) const;
  std::complex<double> right_gain(double omega) const;
  bool symmetric() const noexcept;
  /// Equal delays on both ears: each ear's Gram matrix is a multiple of the joint one.
  bool shared_delay() const noexcept { return delay_l_ == delay_r_; }

 private:
  double delay_l_ = 0.0;
  double delay_r_ = 0.0;
  double mag_l_ = 1.0;
  double mag_r_ = 1.0;
};

/// z~(n) = z(n) - sum_i c_i z(n-i) using the noise model's inverse filter.
/// `history` holds the samples preceding the frame (most recent last); missing
/// history is treated as zeros.
std::vector<double> prewhiten(std::span<const double> frame, std::span<const double> history,
                              const ArModel& noise);

/// Least-squares complex amplitudes of L harmonics of omega0 shared by both
/// ears (or one ear when `right` is empty). Throws std::invalid_argument when
/// the stacked harmonic matrix is rank deficient.
ComplexVector ml_amplitudes(std::span<const std::complex<double>> left,
                            std::span<const std::complex<double>> right, double omega0,
                            std::size_t order, const DirectivityModel& directivity);

/// ||H q||^2 / ||y||^2 over the given ears, clamped to [0, max_voicing].
/// Zero-energy input gives 0.
double degree_of_voicing(std::span<const std::complex<double>> left,
                         std::span<const std::complex<double>> right, double omega0,
                         std::span<const std::complex<double>> amplitudes,
                         const DirectivityModel& directivity, double max_voicing = 0.95);

/// MAP order choice: argmin_L n_obs*ln(var[L-1]) + 3L*ln(n_obs), L = 1..size.
/// Returns 0 if the selected order's voicing (when supplied) is below threshold.
std::size_t map_order_select(std::span<const double> residual_variances, std::size_t n_obs,
                             std::span<const double> voicing = {}, double threshold = 0.3);

struct PitchOptions {
  double sample_rate = 8000.0;
  double f_min_hz = 80.0;
  double f_max_hz = 400.0;
  double step_hz = 0.5;
  std::size_t max_harmonics = 0;  // 0: every harmonic below Nyquist
  double voicing_threshold = 0.3;
  double max_voicing = 0.95;
};

/// Candidate fundamental frequencies (rad/sample), ascending.
std::vector<double> pitch_grid(const PitchOptions& options);

struct PitchResult {
  PitchInfo info;
  double cost = 0.0;                // ln s_l^2 + ln s_r^2 (or ln s^2) at the chosen candidate
  double raw_voicing = 0.0;         // before gating
  std::size_t candidate_order = 0;  // MAP order before the voicing gate
  ComplexVector amplitudes;
};

/// Grid search over pitch_grid(options) on analytic (complex) frames. The
/// candidate minimizing the order-penalized criterion wins; ties go to the
/// lower frequency. Pass an empty `right` for the single-ear estimator.
PitchResult estimate_pitch(std::span<const std::complex<double>> left,
                           std::span<const std::complex<double>> right,
                           const PitchOptions& options = {},
                           const DirectivityModel& directivity = DirectivityModel::identity());

/// Analytic signal of signal[start, start + len), computed over a window
/// widened by `context` samples per side (clipped to the signal) so the
/// circular edge error of the DFT-based Hilbert transform stays outside.
ComplexVector analytic_frame(std::span<const double> signal, std::size_t start, std::size_t len,
                             std::size_t context = 100);

}  // namespace binaural
