#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "binaural/codebook.hpp"
#include "binaural/kalman.hpp"
#include "binaural/pitch.hpp"
#include "binaural/signal.hpp"
#include "binaural/stp.hpp"

namespace binaural {

enum class Mode { Binaural, Bilateral };

struct RunConfig {
  int sample_rate = 8000;
  std::size_t frame_len = 200;  // 25 ms
  std::size_t dft_len = 200;
  std::size_t smoother_delay = 25;
  Mode mode = Mode::Binaural;
  ExcitationModel excitation = ExcitationModel::VoicedUnvoiced;
  PitchOptions pitch;
  std::size_t pitch_context = 100;
  MuOptions mu;
  bool adaptive_noise = true;  // append the dual-channel noise PSD entry (binaural only)
  std::optional<GammaPrior> noise_prior;
  double tracker_alpha = 0.9;
  double tracker_floor = 0.01;

  /// p_max = ceil(fs / f_min)
  std::size_t max_period() const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Excitation variances are raised to this before smoothing so silent input
/// does not make the innovation variance vanish.
inline constexpr double kMinExcitationVariance = 1e-14;

struct FrameDiagnostics {
  std::size_t frame = 0;
  int channel = -1;  // -1: shared by both ears
  std::size_t best_speech = 0;
  std::size_t best_noise = 0;  // == noise codebook size for the adaptive entry
  double log_weight = 0.0;
  double sigma_d2 = 0.0;
  double sigma_v2 = 0.0;
  double f0_hz = 0.0;
  double voicing = 0.0;
  std::size_t harmonic_order = 0;
};

struct ChannelOutput {
  std::vector<double> enhanced;
  std::vector<FrameParameters> params;
  std::vector<FrameDiagnostics> diagnostics;
};

struct BinauralOutput {
  ChannelOutput left;
  ChannelOutput right;  // in binaural mode params and diagnostics equal the left's
};

/// Codebook-driven enhancer. The noise codebook may be omitted in binaural
/// mode with adaptive_noise on; the dual-channel entry is then the only one.
class Enhancer {
 public:
  Enhancer(const Codebook& speech, std::optional<Codebook> noise, RunConfig config);

  const RunConfig& config() const noexcept { return config_; }

  /// Equal-length channels of at least one frame.
  BinauralOutput process(std::span<const double> left, std::span<const double> right) const;
  BinauralOutput process(const AudioBuffer& stereo) const;
  /// One ear, bilateral estimation path with the single-ear pitch estimator.
  ChannelOutput process_single(std::span<const double> z) const;

  /// Parameter estimation only (no smoothing).
  std::vector<FrameParameters> estimate_binaural(std::span<const double> left,
                                                 std::span<const double> right,
                                                 std::vector<FrameDiagnostics>* diag = nullptr) const;
  std::vector<FrameParameters> estimate_single(std::span<const double> z,
                                               std::vector<FrameDiagnostics>* diag = nullptr,
                                               int channel = 0) const;

 private:
  FrameParameters finish_frame(const StpResult& stp, std::optional<double> dc_noise_variance,
                               std::span<const double> ear_l, std::span<const double> ear_r,
                               std::size_t start, FrameDiagnostics& d) const;
  std::vector<double> smooth(std::span<const double> z, std::span<const FrameParameters> params,
                             double r0) const;

  RunConfig config_;
  std::vector<SpectralShape> speech_;
  std::vector<SpectralShape> noise_;
  std::size_t noise_order_ = 0;
};

/// `frame,best_i,best_j,log_weight,sigma_d2,sigma_v2` with a header row.
void write_diagnostics_csv(std::ostream& out, std::span<const FrameDiagnostics> rows);
/// `frame,f0_hz,period_samples,voicing,order` with a header row.
void write_pitch_csv(std::ostream& out, std::span<const FrameParameters> params,
                     double sample_rate);

}  // namespace binaural
