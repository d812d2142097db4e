#include "binaural/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

namespace binaural {

AudioBuffer::AudioBuffer(int sample_rate, std::vector<double> mono) : sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  channels_.push_back(std::move(mono));
  for (double v : channels_[0]) {
    if (!std::isfinite(v)) throw std::invalid_argument("audio samples must be finite");
  }
}

AudioBuffer::AudioBuffer(int sample_rate, std::vector<double> left, std::vector<double> right)
    : sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (left.size() != right.size()) {
    throw std::invalid_argument("stereo channels must have equal length");
  }
  channels_.push_back(std::move(left));
  channels_.push_back(std::move(right));
  for (const auto& ch : channels_) {
    for (double v : ch) {
      if (!std::isfinite(v)) throw std::invalid_argument("audio samples must be finite");
    }
  }
}

std::span<const double> AudioBuffer::channel(Channel ch) const {
  return channel(ch == Channel::Left ? 0 : 1);
}

std::span<const double> AudioBuffer::channel(int index) const {
  if (index < 0 || index >= channel_count()) {
    throw std::invalid_argument("channel index out of range");
  }
  return channels_[static_cast<std::size_t>(index)];
}

std::vector<double>& AudioBuffer::mutable_channel(int index) {
  if (index < 0 || index >= channel_count()) {
    throw std::invalid_argument("channel index out of range");
  }
  return channels_[static_cast<std::size_t>(index)];
}

std::vector<Frame> extract_frames(const AudioBuffer& buffer, std::size_t frame_len, Channel ch) {
  return extract_frames(buffer.channel(buffer.channel_count() == 1 ? Channel::Left : ch), frame_len,
                        ch);
}

std::vector<Frame> extract_frames(std::span<const double> samples, std::size_t frame_len,
                                  Channel ch) {
  if (frame_len == 0) throw std::invalid_argument("frame length must be positive");
  if (frame_len > samples.size()) {
    throw std::invalid_argument("frame length " + std::to_string(frame_len) +
                                " exceeds buffer length " + std::to_string(samples.size()));
  }
  const std::size_t count = samples.size() / frame_len;
  std::vector<Frame> frames;
  frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    auto first = samples.begin() + static_cast<std::ptrdiff_t>(f * frame_len);
    frames.push_back(Frame{{first, first + static_cast<std::ptrdiff_t>(frame_len)}, f, ch});
  }
  return frames;
}

namespace {

// FFTW plans are created once per (length, direction) and reused through the
// new-array execute interface, which is thread-safe. FFTW_ESTIMATE keeps plan
// selection independent of timing, so results are reproducible run to run.
class PlanCache {
 public:
  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) throw std::runtime_error("FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

ComplexVector transform(ComplexVector data, int sign) {
  if (data.empty()) return data;
  ComplexVector out(data.size());
  fftw_plan plan = plan_cache().get(data.size(), sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace

ComplexVector dft(std::span<const double> x, std::size_t dft_len) {
  if (dft_len < x.size()) throw std::invalid_argument("DFT length shorter than input");
  ComplexVector padded(dft_len);
  std::copy(x.begin(), x.end(), padded.begin());
  return transform(std::move(padded), FFTW_FORWARD);
}

ComplexVector dft(std::span<const std::complex<double>> x, std::size_t dft_len) {
  if (dft_len < x.size()) throw std::invalid_argument("DFT length shorter than input");
  ComplexVector padded(dft_len);
  std::copy(x.begin(), x.end(), padded.begin());
  return transform(std::move(padded), FFTW_FORWARD);
}

ComplexVector idft(std::span<const std::complex<double>> spectrum) {
  ComplexVector out = transform({spectrum.begin(), spectrum.end()}, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

Spectrum periodogram(std::span<const double> frame, std::size_t dft_len) {
  if (frame.empty()) throw std::invalid_argument("empty frame");
  if (dft_len < frame.size()) {
    throw std::invalid_argument("DFT length K must be >= frame length M");
  }
  const ComplexVector X = dft(frame, dft_len);
  const double scale = 1.0 / static_cast<double>(frame.size());
  Spectrum s;
  s.bins.resize(dft_len);
  for (std::size_t k = 0; k < dft_len; ++k) s.bins[k] = std::norm(X[k]) * scale;
  return s;
}

ComplexVector cross_spectrum(std::span<const double> left, std::span<const double> right,
                             std::size_t dft_len) {
  if (left.size() != right.size()) throw std::invalid_argument("channel frames differ in length");
  if (left.empty()) throw std::invalid_argument("empty frame");
  const ComplexVector L = dft(left, dft_len);
  const ComplexVector R = dft(right, dft_len);
  const double scale = 1.0 / static_cast<double>(left.size());
  ComplexVector c(dft_len);
  for (std::size_t k = 0; k < dft_len; ++k) c[k] = L[k] * std::conj(R[k]) * scale;
  return c;
}

std::vector<double> autocorrelation(std::span<const double> frame, std::size_t max_lag) {
  const std::size_t m = frame.size();
  if (max_lag >= m) {
    throw std::invalid_argument("autocorrelation lag " + std::to_string(max_lag) +
                                " must be below frame length " + std::to_string(m));
  }
  std::vector<double> r(max_lag + 1, 0.0);
  for (std::size_t q = 0; q <= max_lag; ++q) {
    double acc = 0.0;
    for (std::size_t n = q; n < m; ++n) acc += frame[n] * frame[n - q];
    r[q] = acc / static_cast<double>(m);
  }
  return r;
}

ComplexVector analytic_signal(std::span<const double> frame) {
  const std::size_t m = frame.size();
  if (m == 0 || m % 2 != 0) {
    throw std::invalid_argument("analytic signal needs an even, non-zero frame length");
  }
  ComplexVector X = dft(frame, m);
  for (std::size_t k = 1; k < m / 2; ++k) X[k] *= 2.0;
  for (std::size_t k = m / 2 + 1; k < m; ++k) X[k] = 0.0;
  return idft(X);
}

double energy(std::span<const double> x) noexcept {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

}  // namespace binaural
