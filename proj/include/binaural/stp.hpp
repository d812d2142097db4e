#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "binaural/codebook.hpp"
#include "binaural/lpc.hpp"
#include "binaural/signal.hpp"

namespace binaural {

/// Joint speech/noise short-term predictor parameters for one frame.
struct StpEstimate {
  ArModel speech;  // a, sigma_d^2
  ArModel noise;   // c, sigma_v^2
  std::size_t frame_index = 0;
};

struct GammaPrior {
  double shape = 1.0;  // kappa
  double scale = 1.0;  // zeta

  /// ln p(x); -inf for x <= 0 when shape > 1.
  double log_pdf(double x) const;
};

struct GammaFit {
  GammaPrior prior;
  bool degenerate = false;  // sample variance ~ 0; shape clamped
  std::size_t iterations = 0;
};

/// Maximum-likelihood gamma fit (Newton on ln k - digamma(k) = ln mean - mean ln).
/// Needs at least 10 positive samples.
GammaFit fit_gamma_prior(std::span<const double> samples);

/// Bins below this fraction of the channel maximum are raised to it.
inline constexpr double kObservedFloor = 1e-12;

Spectrum floor_observed(const Spectrum& observed);

/// (1/K) sum [P/Ph - ln(P/Ph) - 1]; the observed spectrum is floored first.
double is_divergence(const Spectrum& observed, std::span<const double> modeled);
inline double is_divergence(const Spectrum& observed, const Spectrum& modeled) {
  return is_divergence(observed, std::span<const double>(modeled.bins));
}

/// Observed periodograms of one frame (one or two channels), floored against
/// the peak over all channels, with the cached quantities every pair needs.
class Observation {
 public:
  explicit Observation(std::span<const Spectrum> channels, std::size_t frame_len);
  Observation(const Spectrum& left, const Spectrum& right, std::size_t frame_len);

  std::size_t channel_count() const noexcept { return channels_.size(); }
  std::size_t size() const noexcept { return sum_.size(); }
  std::size_t frame_len() const noexcept { return frame_len_; }
  bool all_zero() const noexcept { return all_zero_; }
  const Spectrum& channel(std::size_t c) const { return channels_.at(c); }
  /// Sum over channels of the floored spectra.
  const std::vector<double>& sum() const noexcept { return sum_; }

  /// sum over channels of d_IS(P_ch, modeled)
  double cost(std::span<const double> modeled) const;
  /// -(M/2) * cost
  double log_likelihood(std::span<const double> modeled) const;

 private:
  std::vector<Spectrum> channels_;
  std::vector<double> sum_;
  double log_sum_ = 0.0;  // sum over channels and bins of ln P
  std::size_t frame_len_ = 0;
  bool all_zero_ = false;
};

struct MuOptions {
  std::size_t max_iterations = 50;
  double tolerance = 1e-6;  // relative cost change
  bool record_cost = false;
};

struct MlVariances {
  double speech = 0.0;
  double noise = 0.0;
  double cost = 0.0;
  std::size_t iterations = 0;
  std::vector<double> cost_trace;  // initial cost then one per iteration, if requested
};

/// Multiplicative-update ML excitation variances for one (speech, noise)
/// envelope pair. Envelopes are the unit-variance AR envelopes.
MlVariances ml_excitation_variances(const Observation& obs, std::span<const double> speech_env,
                                    std::span<const double> noise_env, double init_speech,
                                    double init_noise, const MuOptions& options = {});

/// Default MU starting point: mean over bins of (sum of channel spectra) / 2.
double default_mu_init(const Observation& obs);

/// Unnormalized exp(-(M/2) sum_ch d_IS(P_ch, modeled)).
double pair_likelihood(const Observation& obs, std::span<const double> modeled);

/// exp(x - max x) normalized to sum 1. Throws NumericalError if every entry is -inf or NaN.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

/// A codebook entry with its AR model and K-bin envelope precomputed.
struct SpectralShape {
  LsfVector lsf;
  ArModel model;
  Spectrum envelope;
};

std::vector<SpectralShape> make_shapes(const Codebook& codebook, std::size_t dft_len);
SpectralShape make_shape(const ArModel& model, std::size_t dft_len);

struct StpOptions {
  MuOptions mu;
  std::optional<GammaPrior> noise_prior;  // uniform when absent
};

struct StpDiagnostics {
  std::size_t best_speech = 0;
  std::size_t best_noise = 0;
  double best_log_weight = 0.0;
  double best_weight = 0.0;
  double best_speech_variance = 0.0;
  double best_noise_variance = 0.0;
  bool fallback = false;  // every weight was zero; the best-likelihood pair was used
};

struct StpResult {
  StpEstimate estimate;
  StpDiagnostics diagnostics;
  std::vector<double> weights;  // row-major [speech][noise]
};

/// MMSE combination of per-pair ML solutions over the two codebooks.
StpResult estimate_stp(const Observation& obs, std::span<const SpectralShape> speech,
                       std::span<const SpectralShape> noise, const StpOptions& options = {},
                       std::size_t frame_index = 0);

/// Single-frame noise PSD from auto and cross spectra, no smoothing:
/// max(mean power - |cross|, floor * mean power).
Spectrum dual_channel_noise_psd(const Spectrum& left, const Spectrum& right,
                                std::span<const std::complex<double>> cross,
                                double floor = 0.01);

/// Recursively smoothed variant used frame by frame.
class DualChannelNoiseTracker {
 public:
  explicit DualChannelNoiseTracker(double alpha = 0.9, double floor = 0.01);

  Spectrum update(const Spectrum& left, const Spectrum& right,
                  std::span<const std::complex<double>> cross);
  void reset();

 private:
  double alpha_;
  double floor_;
  bool primed_ = false;
  std::vector<double> left_;
  std::vector<double> right_;
  ComplexVector cross_;
};

/// Relative lift of r(0) before the AR fit of a PSD.
inline constexpr double kPsdWhiteNoiseCorrection = 1e-9;

/// AR(Q) fit to a PSD: autocorrelation by inverse DFT, r(0) lifted by
/// kPsdWhiteNoiseCorrection, then Levinson-Durbin.
ArModel noise_psd_to_ar(const Spectrum& psd, std::size_t order);

struct SurfacePoint {
  double speech_variance;
  double noise_variance;
  double log_likelihood;
};

/// Log-likelihood over a grid of variances for fixed envelopes.
std::vector<SurfacePoint> likelihood_surface(const Observation& obs,
                                             std::span<const double> speech_env,
                                             std::span<const double> noise_env,
                                             std::span<const double> speech_grid,
                                             std::span<const double> noise_grid);

}  // namespace binaural
