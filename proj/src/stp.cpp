#include "binaural/stp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "binaural/errors.hpp"
#include "binaural/simd.hpp"

namespace binaural {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_positive(std::span<const double> env, const char* what) {
  for (double v : env) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": envelope bins must be positive and finite");
    }
  }
}

}  // namespace

double GammaPrior::log_pdf(double x) const {
  if (!(x > 0.0)) {
    if (shape > 1.0) return kNegInf;
    if (shape == 1.0) return -std::log(scale);
    return std::numeric_limits<double>::infinity();
  }
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

GammaFit fit_gamma_prior(std::span<const double> samples) {
  if (samples.size() < 10) throw std::invalid_argument("fit_gamma_prior: need at least 10 samples");
  double mean = 0.0;
  double mean_log = 0.0;
  for (double x : samples) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("fit_gamma_prior: samples must be positive and finite");
    }
    mean += x;
    mean_log += std::log(x);
  }
  const double n = static_cast<double>(samples.size());
  mean /= n;
  mean_log /= n;
  const double s = std::log(mean) - mean_log;

  constexpr double kMaxShape = 1e8;
  GammaFit fit;
  if (!(s > 1.0 / kMaxShape)) {
    fit.degenerate = true;
    fit.prior = {kMaxShape, mean / kMaxShape};
    return fit;
  }
  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (fit.iterations = 1; fit.iterations <= 100; ++fit.iterations) {
    const double g = std::log(k) - boost::math::digamma(k) - s;
    const double dg = 1.0 / k - boost::math::trigamma(k);
    double next = k - g / dg;
    if (!(next > 0.0)) next = k / 2.0;
    const bool done = std::abs(next - k) <= 1e-12 * k;
    k = next;
    if (done) break;
  }
  fit.prior = {k, mean / k};
  return fit;
}

namespace {

double checked_peak(const Spectrum& observed) {
  double peak = 0.0;
  for (double v : observed.bins) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("observed spectrum must be non-negative and finite");
    }
    peak = std::max(peak, v);
  }
  return peak;
}

Spectrum floored(const Spectrum& observed, double peak) {
  Spectrum out = observed;
  const double floor = kObservedFloor * peak;
  for (double& v : out.bins) v = std::max(v, floor);
  return out;
}

}  // namespace

Spectrum floor_observed(const Spectrum& observed) { return floored(observed, checked_peak(observed)); }

double is_divergence(const Spectrum& observed, std::span<const double> modeled) {
  if (observed.size() != modeled.size()) throw std::invalid_argument("is_divergence: length mismatch");
  if (observed.size() == 0) throw std::invalid_argument("is_divergence: empty spectrum");
  require_positive(modeled, "is_divergence");
  const Spectrum p = floor_observed(observed);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double r = p[k] / modeled[k];
    acc += r - std::log(r) - 1.0;
  }
  return acc / static_cast<double>(p.size());
}

Observation::Observation(std::span<const Spectrum> channels, std::size_t frame_len)
    : frame_len_(frame_len) {
  if (channels.empty() || channels.size() > 2) {
    throw std::invalid_argument("Observation: one or two channels required");
  }
  if (frame_len == 0) throw std::invalid_argument("Observation: frame length must be positive");
  const std::size_t k = channels[0].size();
  if (k == 0) throw std::invalid_argument("Observation: empty spectrum");
  double peak = 0.0;
  for (const auto& ch : channels) {
    if (ch.size() != k) throw std::invalid_argument("Observation: channel lengths differ");
    peak = std::max(peak, checked_peak(ch));
  }
  for (const auto& ch : channels) channels_.push_back(floored(ch, peak));
  sum_.assign(k, 0.0);
  for (const auto& ch : channels_) {
    for (std::size_t i = 0; i < k; ++i) sum_[i] += ch[i];
  }
  all_zero_ = std::all_of(sum_.begin(), sum_.end(), [](double v) { return v == 0.0; });
  if (!all_zero_) {
    // per-channel partial sums keep the total independent of channel order
    std::vector<double> partial;
    for (const auto& ch : channels_) {
      double acc = 0.0;
      for (double v : ch.bins) acc += std::log(v);
      partial.push_back(acc);
    }
    log_sum_ = partial.size() == 2 ? partial[0] + partial[1] : partial[0];
  }
}

Observation::Observation(const Spectrum& left, const Spectrum& right, std::size_t frame_len)
    : Observation(std::span<const Spectrum>(std::vector<Spectrum>{left, right}), frame_len) {}

double Observation::cost(std::span<const double> modeled) const {
  if (modeled.size() != size()) throw std::invalid_argument("Observation::cost: length mismatch");
  if (all_zero_) return 0.0;
  const auto& kern = simd::kernels();
  const double c = static_cast<double>(channel_count());
  const double k = static_cast<double>(size());
  const double ratio = kern.ratio_sum(sum_.data(), modeled.data(), size());
  const double log_model = kern.log_sum(modeled.data(), size());
  return (ratio - log_sum_ + c * log_model - c * k) / k;
}

double Observation::log_likelihood(std::span<const double> modeled) const {
  return -0.5 * static_cast<double>(frame_len_) * cost(modeled);
}

double default_mu_init(const Observation& obs) {
  const auto& s = obs.sum();
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()) / 2.0;
}

MlVariances ml_excitation_variances(const Observation& obs, std::span<const double> speech_env,
                                    std::span<const double> noise_env, double init_speech,
                                    double init_noise, const MuOptions& options) {
  const std::size_t k = obs.size();
  if (speech_env.size() != k || noise_env.size() != k) {
    throw std::invalid_argument("ml_excitation_variances: envelope length mismatch");
  }
  require_positive(speech_env, "ml_excitation_variances");
  require_positive(noise_env, "ml_excitation_variances");
  if (!(init_speech > 0.0) || !(init_noise > 0.0)) {
    throw std::invalid_argument("ml_excitation_variances: initial variances must be positive");
  }
  MlVariances out;
  if (obs.all_zero()) {
    out.iterations = 1;
    if (options.record_cost) out.cost_trace = {0.0, 0.0};
    return out;
  }

  const auto& kern = simd::kernels();
  const double channels = static_cast<double>(obs.channel_count());
  std::vector<double> model(k);
  double sd = init_speech;
  double sv = init_noise;
  kern.mix2(speech_env.data(), sd, noise_env.data(), sv, model.data(), k);
  double cost = obs.cost(model);
  if (options.record_cost) out.cost_trace.push_back(cost);

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const simd::MuSums m = kern.mu_sums(speech_env.data(), noise_env.data(), obs.sum().data(), sd, sv, k);
    sd *= m.num_s / (channels * m.den_s);
    sv *= m.num_w / (channels * m.den_w);
    kern.mix2(speech_env.data(), sd, noise_env.data(), sv, model.data(), k);
    const double next = obs.cost(model);
    out.iterations = it + 1;
    if (options.record_cost) out.cost_trace.push_back(next);
    const double change = std::abs(cost - next) / std::max(std::abs(cost), 1e-300);
    cost = next;
    if (change < options.tolerance) break;
  }
  if (!std::isfinite(sd) || !std::isfinite(sv)) {
    throw NumericalError("ml_excitation_variances: update diverged");
  }
  out.speech = sd;
  out.noise = sv;
  out.cost = cost;
  return out;
}

double pair_likelihood(const Observation& obs, std::span<const double> modeled) {
  require_positive(modeled, "pair_likelihood");
  return std::exp(obs.log_likelihood(modeled));
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  double peak = kNegInf;
  for (double v : log_weights) {
    if (!std::isnan(v)) peak = std::max(peak, v);
  }
  if (!std::isfinite(peak)) throw NumericalError("normalize_log_weights: no finite weight");
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::isnan(log_weights[i]) ? 0.0 : std::exp(log_weights[i] - peak);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

SpectralShape make_shape(const ArModel& model, std::size_t dft_len) {
  ArModel unit{model.coefficients, 1.0};
  return {ar_to_lsf(unit), unit, ar_envelope(unit, dft_len)};
}

std::vector<SpectralShape> make_shapes(const Codebook& codebook, std::size_t dft_len) {
  codebook.validate();
  std::vector<SpectralShape> out;
  out.reserve(codebook.size());
  for (std::size_t i = 0; i < codebook.size(); ++i) {
    ArModel m = codebook.model(i);
    Spectrum env = ar_envelope(m, dft_len);
    out.push_back({codebook.entries[i], std::move(m), std::move(env)});
  }
  return out;
}

namespace {

ArModel average_shapes(std::span<const SpectralShape> shapes, std::span<const double> weights,
                       double variance) {
  const std::size_t order = shapes[0].lsf.order();
  LsfVector mean{std::vector<double>(order, 0.0)};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (weights[i] == 0.0) continue;
    for (std::size_t p = 0; p < order; ++p) mean.frequencies[p] += weights[i] * shapes[i].lsf.frequencies[p];
  }
  ArModel out = lsf_to_ar(mean);
  out.excitation_variance = variance;
  return out;
}

}  // namespace

StpResult estimate_stp(const Observation& obs, std::span<const SpectralShape> speech,
                       std::span<const SpectralShape> noise, const StpOptions& options,
                       std::size_t frame_index) {
  if (speech.empty() || noise.empty()) throw std::invalid_argument("estimate_stp: empty codebook");
  for (const auto* set : {&speech, &noise}) {
    for (const auto& s : *set) {
      if (s.envelope.size() != obs.size()) throw std::invalid_argument("estimate_stp: envelope length mismatch");
      if (s.lsf.order() != (*set)[0].lsf.order()) throw std::invalid_argument("estimate_stp: mixed orders");
    }
  }
  const std::size_t ns = speech.size();
  const std::size_t nw = noise.size();
  std::vector<double> sd(ns * nw), sv(ns * nw), loglik(ns * nw), logw(ns * nw);
  const double init = obs.all_zero() ? 1.0 : default_mu_init(obs);
  std::vector<double> model(obs.size());
  const auto& kern = simd::kernels();

  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nw; ++j) {
      const std::size_t ij = i * nw + j;
      const MlVariances v = ml_excitation_variances(obs, speech[i].envelope.bins, noise[j].envelope.bins,
                                                    init, init, options.mu);
      sd[ij] = v.speech;
      sv[ij] = v.noise;
      if (obs.all_zero()) {
        loglik[ij] = 0.0;
      } else {
        kern.mix2(speech[i].envelope.bins.data(), v.speech, noise[j].envelope.bins.data(), v.noise,
                  model.data(), model.size());
        loglik[ij] = obs.log_likelihood(model);
      }
      logw[ij] = loglik[ij] + (options.noise_prior ? options.noise_prior->log_pdf(v.noise) : 0.0);
    }
  }

  StpResult result;
  result.estimate.frame_index = frame_index;
  const auto best_of = [](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] > v[best]) best = i;
    }
    return best;
  };
  try {
    result.weights = normalize_log_weights(logw);
  } catch (const NumericalError&) {
    result.weights.assign(ns * nw, 0.0);
    result.weights[best_of(loglik)] = 1.0;
    result.diagnostics.fallback = true;
  }
  const std::size_t best = best_of(result.diagnostics.fallback ? loglik : logw);
  result.diagnostics.best_speech = best / nw;
  result.diagnostics.best_noise = best % nw;
  result.diagnostics.best_log_weight = logw[best];
  result.diagnostics.best_weight = result.weights[best];
  result.diagnostics.best_speech_variance = sd[best];
  result.diagnostics.best_noise_variance = sv[best];

  std::vector<double> ws(ns, 0.0), ww(nw, 0.0);
  double var_s = 0.0;
  double var_w = 0.0;
  for (std::size_t ij = 0; ij < ns * nw; ++ij) {
    const double w = result.weights[ij];
    ws[ij / nw] += w;
    ww[ij % nw] += w;
    var_s += w * sd[ij];
    var_w += w * sv[ij];
  }
  result.estimate.speech = average_shapes(speech, ws, var_s);
  result.estimate.noise = average_shapes(noise, ww, var_w);
  return result;
}

Spectrum dual_channel_noise_psd(const Spectrum& left, const Spectrum& right,
                                std::span<const std::complex<double>> cross, double floor) {
  if (left.size() != right.size() || cross.size() != left.size()) {
    throw std::invalid_argument("dual_channel_noise_psd: length mismatch");
  }
  Spectrum out{std::vector<double>(left.size())};
  for (std::size_t k = 0; k < left.size(); ++k) {
    const double mean = 0.5 * (left[k] + right[k]);
    out.bins[k] = std::max(mean - std::abs(cross[k]), floor * mean);
  }
  return out;
}

DualChannelNoiseTracker::DualChannelNoiseTracker(double alpha, double floor)
    : alpha_(alpha), floor_(floor) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("noise tracker: alpha must be in [0, 1)");
  if (!(floor > 0.0 && floor <= 1.0)) throw std::invalid_argument("noise tracker: floor must be in (0, 1]");
}

void DualChannelNoiseTracker::reset() {
  primed_ = false;
  left_.clear();
  right_.clear();
  cross_.clear();
}

Spectrum DualChannelNoiseTracker::update(const Spectrum& left, const Spectrum& right,
                                         std::span<const std::complex<double>> cross) {
  if (left.size() != right.size() || cross.size() != left.size()) {
    throw std::invalid_argument("dual_channel_noise_psd: length mismatch");
  }
  if (!primed_ || left_.size() != left.size()) {
    left_ = left.bins;
    right_ = right.bins;
    cross_.assign(cross.begin(), cross.end());
    primed_ = true;
  } else {
    const double b = 1.0 - alpha_;
    for (std::size_t k = 0; k < left.size(); ++k) {
      left_[k] = alpha_ * left_[k] + b * left[k];
      right_[k] = alpha_ * right_[k] + b * right[k];
      cross_[k] = alpha_ * cross_[k] + b * cross[k];
    }
  }
  return dual_channel_noise_psd(Spectrum{left_}, Spectrum{right_}, cross_, floor_);
}

ArModel noise_psd_to_ar(const Spectrum& psd, std::size_t order) {
  if (psd.size() == 0) throw std::invalid_argument("noise_psd_to_ar: empty PSD");
  if (order >= psd.size()) throw std::invalid_argument("noise_psd_to_ar: order must be below the DFT length");
  bool any = false;
  for (double v : psd.bins) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("noise_psd_to_ar: PSD must be non-negative");
    any = any || v > 0.0;
  }
  if (!any) throw std::invalid_argument("noise_psd_to_ar: PSD is all zero");
  ComplexVector spec(psd.bins.begin(), psd.bins.end());
  const ComplexVector r = idft(spec);
  std::vector<double> autocorr(order + 1);
  for (std::size_t q = 0; q <= order; ++q) autocorr[q] = r[q].real();
  // A line spectrum (e.g. pure DC) makes the Toeplitz matrix singular.
  autocorr[0] *= 1.0 + kPsdWhiteNoiseCorrection;
  return levinson_durbin(autocorr);
}

std::vector<SurfacePoint> likelihood_surface(const Observation& obs,
                                             std::span<const double> speech_env,
                                             std::span<const double> noise_env,
                                             std::span<const double> speech_grid,
                                             std::span<const double> noise_grid) {
  if (speech_env.size() != obs.size() || noise_env.size() != obs.size()) {
    throw std::invalid_argument("likelihood_surface: envelope length mismatch");
  }
  require_positive(speech_env, "likelihood_surface");
  require_positive(noise_env, "likelihood_surface");
  std::vector<SurfacePoint> out;
  out.reserve(speech_grid.size() * noise_grid.size());
  std::vector<double> model(obs.size());
  for (double sd : speech_grid) {
    for (double sv : noise_grid) {
      if (!(sd >= 0.0) || !(sv >= 0.0) || (sd == 0.0 && sv == 0.0)) {
        throw std::invalid_argument("likelihood_surface: grid values must be non-negative, not both zero");
      }
      simd::kernels().mix2(speech_env.data(), sd, noise_env.data(), sv, model.data(), model.size());
      out.push_back({sd, sv, obs.log_likelihood(model)});
    }
  }
  return out;
}

}  // namespace binaural
