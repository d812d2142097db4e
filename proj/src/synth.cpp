#include "binaural/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace binaural {

namespace {

// Time-varying AR filter with state carried across coefficient changes.
class ArFilter {
 public:
  explicit ArFilter(std::size_t order) : hist_(order, 0.0) {}
  double step(const std::vector<double>& a, double e) {
    double y = e;
    for (std::size_t i = 0; i < a.size(); ++i) y += a[i] * hist_[i];
    for (std::size_t i = hist_.size(); i-- > 1;) hist_[i] = hist_[i - 1];
    if (!hist_.empty()) hist_[0] = y;
    return y;
  }

 private:
  std::vector<double> hist_;
};

}  // namespace

Codebook random_codebook(CodebookKind kind, std::size_t size, std::size_t order,
                         std::uint64_t seed, double max_reflection, double first_min) {
  if (size == 0 || order == 0) throw std::invalid_argument("random_codebook: empty size or order");
  if (!(max_reflection > 0.0 && max_reflection < 1.0) || !(first_min < max_reflection))
    throw std::invalid_argument("random_codebook: reflection bounds must lie in (-1, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> any(-max_reflection, max_reflection);
  std::uniform_real_distribution<double> first(first_min, max_reflection);
  Codebook cb;
  cb.kind = kind;
  cb.order = order;
  while (cb.entries.size() < size) {
    std::vector<double> k(order);
    for (std::size_t i = 0; i < order; ++i) k[i] = i == 0 ? first(rng) : any(rng);
    const ArModel m{reflection_to_ar(k), 1.0};
    LsfVector lsf = ar_to_lsf(m);
    if (is_valid_lsf(lsf.frequencies)) cb.entries.push_back(std::move(lsf));
  }
  return cb;
}

Codebook formant_codebook(std::size_t size, std::size_t order, std::uint64_t seed,
                          double sample_rate) {
  if (size == 0 || order < 2) throw std::invalid_argument("formant_codebook: need size > 0 and order >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t pairs = order / 2;
  const double lo = 200.0, hi = std::min(3800.0, 0.475 * sample_rate);
  const double band = (hi - lo) / static_cast<double>(pairs);
  Codebook cb;
  cb.kind = CodebookKind::Speech;
  cb.order = order;
  while (cb.entries.size() < size) {
    std::vector<double> poly{1.0};  // inverse filter A(z), ascending powers of z^-1
    for (std::size_t i = 0; i < pairs; ++i) {
      const double f = lo + band * (static_cast<double>(i) + 0.15 + 0.7 * unit(rng));
      const double bw = 60.0 + 190.0 * unit(rng);
      const double r = std::exp(-std::numbers::pi * bw / sample_rate);
      const double c = -2.0 * r * std::cos(2.0 * std::numbers::pi * f / sample_rate);
      std::vector<double> next(poly.size() + 2, 0.0);
      for (std::size_t j = 0; j < poly.size(); ++j) {
        next[j] += poly[j];
        next[j + 1] += c * poly[j];
        next[j + 2] += r * r * poly[j];
      }
      poly = std::move(next);
    }
    if (poly.size() < order + 1) poly.push_back(0.0);
    ArModel m{std::vector<double>(order), 1.0};
    for (std::size_t i = 0; i < order; ++i) m.coefficients[i] = -poly[i + 1];
    LsfVector lsf = ar_to_lsf(m);
    if (is_valid_lsf(lsf.frequencies)) cb.entries.push_back(std::move(lsf));
  }
  return cb;
}

Scene make_scene(const Codebook& speech, const Codebook& noise, const SceneOptions& o) {
  speech.validate();
  noise.validate();
  if (o.frame_len == 0 || o.length < o.frame_len)
    throw std::invalid_argument("make_scene: length must cover at least one frame");
  if (o.speech_segment_frames == 0 || o.noise_segment_frames == 0)
    throw std::invalid_argument("make_scene: segment lengths must be positive");
  if (!(o.voicing_gain >= 0.0 && o.voicing_gain < 1.0))
    throw std::invalid_argument("make_scene: voicing gain must lie in [0, 1)");
  if (!(o.noise_coherence >= 0.0 && o.noise_coherence <= 1.0))
    throw std::invalid_argument("make_scene: noise coherence must lie in [0, 1]");

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = o.length;
  const std::size_t m = o.frame_len;
  const std::size_t frames = (n + m - 1) / m;
  const double fs = o.sample_rate;

  std::vector<ArModel> s_models, w_models;
  for (std::size_t i = 0; i < speech.size(); ++i) s_models.push_back(speech.model(i));
  for (std::size_t i = 0; i < noise.size(); ++i) w_models.push_back(noise.model(i));

  Scene sc;
  sc.sample_rate = o.sample_rate;
  sc.truth.resize(frames);
  sc.speech_entry.resize(frames);
  sc.noise_entry.resize(frames);

  // Per-frame speech and noise settings, held over segments.
  std::size_t s_idx = 0, w_idx = 0;
  double s_var = 1.0;
  PitchInfo pitch;
  for (std::size_t f = 0; f < frames; ++f) {
    if (f % o.speech_segment_frames == 0) {
      s_idx = static_cast<std::size_t>(rng() % speech.size());
      s_var = std::pow(10.0, (unit(rng) - 0.5) * o.level_spread_db / 10.0);
      pitch = PitchInfo{};
      if (unit(rng) < o.voiced_fraction) {
        const double f0 = o.f0_min_hz + unit(rng) * (o.f0_max_hz - o.f0_min_hz);
        pitch.period = static_cast<std::size_t>(std::lround(fs / f0));
        pitch.omega0 = 2.0 * std::numbers::pi / static_cast<double>(pitch.period);
        pitch.voicing = o.voicing_gain;
        pitch.harmonic_order = 1;
      }
    }
    if (f % o.noise_segment_frames == 0) w_idx = static_cast<std::size_t>(rng() % noise.size());
    sc.speech_entry[f] = s_idx;
    sc.noise_entry[f] = w_idx;
    sc.truth[f].stp.speech = ArModel{s_models[s_idx].coefficients, s_var};
    sc.truth[f].stp.noise = ArModel{w_models[w_idx].coefficients, 1.0};
    sc.truth[f].stp.frame_index = f;
    sc.truth[f].pitch = pitch;
  }

  // Speech: u(n) = b u(n-p) + d(n), var d = (1 - b^2) var u on voiced frames.
  std::vector<double> u(n, 0.0), clean(n);
  ArFilter sf(speech.order);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& tr = sc.truth[t / m];
    const double var_u = tr.stp.speech.excitation_variance;
    if (tr.pitch.voiced()) {
      const double b = tr.pitch.voicing;
      const std::size_t p = tr.pitch.period;
      u[t] = std::sqrt((1.0 - b * b) * var_u) * gauss(rng) + (t >= p ? b * u[t - p] : 0.0);
    } else {
      u[t] = std::sqrt(var_u) * gauss(rng);
    }
    clean[t] = sf.step(tr.stp.speech.coefficients, u[t]);
  }

  // Noise: common + ear-specific components, unit excitation before scaling.
  const double gc = std::sqrt(o.noise_coherence), gi = std::sqrt(1.0 - o.noise_coherence);
  ArFilter fc(noise.order), fl(noise.order), fr(noise.order);
  std::vector<double> wl(n), wr(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& a = sc.truth[t / m].stp.noise.coefficients;
    const double c = fc.step(a, gauss(rng));
    wl[t] = gc * c + gi * fl.step(a, gauss(rng));
    wr[t] = gc * c + gi * fr.step(a, gauss(rng));
  }

  const double ps = 2.0 * energy(clean);
  const double pw = energy(wl) + energy(wr);
  const double g = pw > 0.0 ? std::sqrt(ps / pw * std::pow(10.0, -o.snr_db / 10.0)) : 0.0;
  for (auto& f : sc.truth) f.stp.noise.excitation_variance = g * g;

  sc.clean_l = clean;
  sc.clean_r = clean;
  sc.noise_l.resize(n);
  sc.noise_r.resize(n);
  sc.noisy_l.resize(n);
  sc.noisy_r.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    sc.noise_l[t] = g * wl[t];
    sc.noise_r[t] = g * wr[t];
    sc.noisy_l[t] = clean[t] + sc.noise_l[t];
    sc.noisy_r[t] = clean[t] + sc.noise_r[t];
  }
  return sc;
}

}  // namespace binaural
