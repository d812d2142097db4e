#include "binaural/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <string>

#include "binaural/errors.hpp"

namespace binaural {

namespace {

[[noreturn]] void rethrow_at(std::size_t frame, const NumericalError& e) {
  throw NumericalError("pipeline: frame " + std::to_string(frame) + ": " + e.what());
}

double mean_square(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return energy(x) / static_cast<double>(x.size());
}

// Analytic signal of the pre-whitened frame at `start`, with the context
// window pre-whitened by the same noise model.
ComplexVector whitened_analytic(std::span<const double> z, std::size_t start, std::size_t len,
                                std::size_t context, const ArModel& noise) {
  const std::size_t lo = start >= context ? start - context : 0;
  const std::size_t hi = std::min(z.size(), start + len + context);
  const std::size_t hist_lo = lo >= noise.order() ? lo - noise.order() : 0;
  const auto window = z.subspan(lo, hi - lo);
  const auto history = z.subspan(hist_lo, lo - hist_lo);
  const auto white = prewhiten(window, history, noise);
  return analytic_frame(white, start - lo, len, context);
}

}  // namespace

std::size_t RunConfig::max_period() const {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(sample_rate) / pitch.f_min_hz));
}

void RunConfig::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("RunConfig: sample rate must be positive");
  if (frame_len == 0) throw std::invalid_argument("RunConfig: frame length must be positive");
  if (dft_len < frame_len) throw std::invalid_argument("RunConfig: DFT length below frame length");
  if (!(pitch.f_min_hz > 0.0) || !(pitch.f_max_hz > pitch.f_min_hz))
    throw std::invalid_argument("RunConfig: invalid pitch range");
  if (static_cast<double>(sample_rate) != pitch.sample_rate)
    throw std::invalid_argument("RunConfig: pitch sample rate differs from the run's");
  if (mu.max_iterations == 0) throw std::invalid_argument("RunConfig: MU budget must be positive");
  if (!(tracker_alpha >= 0.0 && tracker_alpha < 1.0))
    throw std::invalid_argument("RunConfig: tracker smoothing must lie in [0, 1)");
}

Enhancer::Enhancer(const Codebook& speech, std::optional<Codebook> noise, RunConfig config)
    : config_(std::move(config)) {
  config_.validate();
  if (speech.kind != CodebookKind::Speech)
    throw std::invalid_argument("Enhancer: first codebook is not a speech codebook");
  if (speech.order > config_.smoother_delay)
    throw std::invalid_argument("Enhancer: speech order " + std::to_string(speech.order) +
                                " exceeds the smoother delay");
  speech_ = make_shapes(speech, config_.dft_len);
  if (noise) {
    if (noise->kind != CodebookKind::Noise)
      throw std::invalid_argument("Enhancer: second codebook is not a noise codebook");
    noise_ = make_shapes(*noise, config_.dft_len);
    noise_order_ = noise->order;
  } else {
    if (!config_.adaptive_noise)
      throw std::invalid_argument("Enhancer: no noise codebook and adaptive noise is off");
    noise_order_ = speech.order;
  }
}

FrameParameters Enhancer::finish_frame(const StpResult& stp, std::optional<double> dc_noise_variance,
                                       std::span<const double> ear_l, std::span<const double> ear_r,
                                       std::size_t start, FrameDiagnostics& d) const {
  FrameParameters p;
  p.stp = stp.estimate;
  if (dc_noise_variance)
    p.stp.noise.excitation_variance = 0.5 * (p.stp.noise.excitation_variance + *dc_noise_variance);
  p.stp.speech.excitation_variance = std::max(p.stp.speech.excitation_variance, kMinExcitationVariance);
  p.stp.noise.excitation_variance = std::max(p.stp.noise.excitation_variance, kMinExcitationVariance);

  if (config_.excitation == ExcitationModel::VoicedUnvoiced) {
    const auto al = whitened_analytic(ear_l, start, config_.frame_len, config_.pitch_context, p.stp.noise);
    ComplexVector ar;
    if (!ear_r.empty())
      ar = whitened_analytic(ear_r, start, config_.frame_len, config_.pitch_context, p.stp.noise);
    p.pitch = estimate_pitch(al, ar, config_.pitch).info;
  }

  d.frame = stp.estimate.frame_index;
  d.best_speech = stp.diagnostics.best_speech;
  d.best_noise = stp.diagnostics.best_noise;
  d.log_weight = stp.diagnostics.best_log_weight;
  d.sigma_d2 = p.stp.speech.excitation_variance;
  d.sigma_v2 = p.stp.noise.excitation_variance;
  d.f0_hz = p.pitch.voiced() ? p.pitch.f0_hz(config_.pitch.sample_rate) : 0.0;
  d.voicing = p.pitch.voicing;
  d.harmonic_order = p.pitch.harmonic_order;
  return p;
}

std::vector<FrameParameters> Enhancer::estimate_binaural(std::span<const double> left,
                                                         std::span<const double> right,
                                                         std::vector<FrameDiagnostics>* diag) const {
  if (left.size() != right.size())
    throw std::invalid_argument("estimate_binaural: channel lengths differ (" +
                                std::to_string(left.size()) + " vs " + std::to_string(right.size()) + ")");
  const std::size_t m = config_.frame_len;
  const std::size_t k = config_.dft_len;
  if (left.size() < m) throw std::invalid_argument("estimate_binaural: input shorter than one frame");
  const std::size_t frames = left.size() / m;

  DualChannelNoiseTracker tracker(config_.tracker_alpha, config_.tracker_floor);
  StpOptions opts{config_.mu, config_.noise_prior};
  std::vector<FrameParameters> out;
  out.reserve(frames);
  std::vector<SpectralShape> noise = noise_;
  noise.reserve(noise_.size() + 1);

  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * m;
    const auto l = left.subspan(start, m);
    const auto r = right.subspan(start, m);
    const Spectrum pl = periodogram(l, k);
    const Spectrum pr = periodogram(r, k);

    std::optional<double> dc_variance;
    noise.resize(noise_.size());
    if (config_.adaptive_noise) {
      const Spectrum psd = tracker.update(pl, pr, cross_spectrum(l, r, k));
      const bool silent = std::all_of(psd.bins.begin(), psd.bins.end(), [](double v) { return v <= 0.0; });
      if (!silent) {
        const ArModel dc = noise_psd_to_ar(psd, noise_order_);
        dc_variance = dc.excitation_variance;
        noise.push_back(make_shape(dc, k));
      }
    }
    if (noise.empty()) throw std::invalid_argument("estimate_binaural: no noise shapes for a silent frame");

    FrameDiagnostics d;
    try {
      const Observation obs(pl, pr, m);
      const StpResult stp = estimate_stp(obs, speech_, noise, opts, f);
      out.push_back(finish_frame(stp, dc_variance, left, right, start, d));
    } catch (const NumericalError& e) {
      rethrow_at(f, e);
    }
    if (diag) diag->push_back(d);
  }
  return out;
}

std::vector<FrameParameters> Enhancer::estimate_single(std::span<const double> z,
                                                       std::vector<FrameDiagnostics>* diag,
                                                       int channel) const {
  if (noise_.empty())
    throw std::invalid_argument("single-ear estimation needs a noise codebook");
  const std::size_t m = config_.frame_len;
  if (z.size() < m) throw std::invalid_argument("estimate_single: input shorter than one frame");
  const std::size_t frames = z.size() / m;
  StpOptions opts{config_.mu, config_.noise_prior};
  std::vector<FrameParameters> out;
  out.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * m;
    const Spectrum p = periodogram(z.subspan(start, m), config_.dft_len);
    FrameDiagnostics d;
    try {
      const Observation obs(std::span<const Spectrum>(&p, 1), m);
      const StpResult stp = estimate_stp(obs, speech_, noise_, opts, f);
      out.push_back(finish_frame(stp, std::nullopt, z, {}, start, d));
    } catch (const NumericalError& e) {
      rethrow_at(f, e);
    }
    d.channel = channel;
    if (diag) diag->push_back(d);
  }
  return out;
}

std::vector<double> Enhancer::smooth(std::span<const double> z,
                                     std::span<const FrameParameters> params, double r0) const {
  SmootherConfig sc;
  sc.frame_len = config_.frame_len;
  sc.smoother_delay = config_.smoother_delay;
  sc.max_period = config_.max_period();
  sc.excitation = config_.excitation;
  return enhance_channel(z, params, sc, r0);
}

BinauralOutput Enhancer::process(std::span<const double> left, std::span<const double> right) const {
  BinauralOutput out;
  const std::size_t first = std::min(config_.frame_len, left.size());
  if (config_.mode == Mode::Binaural) {
    out.left.params = estimate_binaural(left, right, &out.left.diagnostics);
    out.right.params = out.left.params;
    out.right.diagnostics = out.left.diagnostics;
    const double r0 = 0.5 * (mean_square(left.first(first)) + mean_square(right.first(first)));
    auto rhs = std::async(std::launch::async, [&] { return smooth(right, out.right.params, r0); });
    out.left.enhanced = smooth(left, out.left.params, r0);
    out.right.enhanced = rhs.get();
  } else {
    if (left.size() != right.size())
      throw std::invalid_argument("process: channel lengths differ");
    auto rhs = std::async(std::launch::async, [&] { return process_single(right); });
    out.left = process_single(left);
    out.right = rhs.get();
    for (auto& d : out.right.diagnostics) d.channel = 1;
  }
  return out;
}

BinauralOutput Enhancer::process(const AudioBuffer& stereo) const {
  if (stereo.channel_count() != 2) throw std::invalid_argument("process: input must be stereo");
  if (stereo.sample_rate() != config_.sample_rate)
    throw std::invalid_argument("process: sample rate " + std::to_string(stereo.sample_rate()) +
                                " differs from the configured " + std::to_string(config_.sample_rate));
  return process(stereo.channel(0), stereo.channel(1));
}

ChannelOutput Enhancer::process_single(std::span<const double> z) const {
  ChannelOutput out;
  out.params = estimate_single(z, &out.diagnostics, 0);
  const std::size_t first = std::min(config_.frame_len, z.size());
  out.enhanced = smooth(z, out.params, mean_square(z.first(first)));
  return out;
}

void write_diagnostics_csv(std::ostream& out, std::span<const FrameDiagnostics> rows) {
  out << "frame,best_i,best_j,log_weight,sigma_d2,sigma_v2\n";
  const auto flags = out.flags();
  const auto prec = out.precision(17);
  for (const auto& d : rows)
    out << d.frame << ',' << d.best_speech << ',' << d.best_noise << ',' << d.log_weight << ','
        << d.sigma_d2 << ',' << d.sigma_v2 << '\n';
  out.precision(prec);
  out.flags(flags);
}

void write_pitch_csv(std::ostream& out, std::span<const FrameParameters> params, double sample_rate) {
  out << "frame,f0_hz,period_samples,voicing,order\n";
  for (std::size_t f = 0; f < params.size(); ++f) {
    const auto& p = params[f].pitch;
    out << f << ',' << (p.voiced() ? p.f0_hz(sample_rate) : 0.0) << ',' << p.period << ','
        << p.voicing << ',' << p.harmonic_order << '\n';
  }
}

}  // namespace binaural
