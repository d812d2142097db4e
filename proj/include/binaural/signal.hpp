#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace binaural {

enum class Channel { Left, Right };

/// Mono or stereo PCM audio as doubles in [-1, 1].
class AudioBuffer {
 public:
  AudioBuffer() = default;
  AudioBuffer(int sample_rate, std::vector<double> mono);
  AudioBuffer(int sample_rate, std::vector<double> left, std::vector<double> right);

  int sample_rate() const noexcept { return sample_rate_; }
  int channel_count() const noexcept { return static_cast<int>(channels_.size()); }
  std::size_t size() const noexcept { return channels_.empty() ? 0 : channels_.front().size(); }

  std::span<const double> channel(Channel ch) const;
  std::span<const double> channel(int index) const;
  std::vector<double>& mutable_channel(int index);

 private:
  int sample_rate_ = 0;
  std::vector<std::vector<double>> channels_;
};

struct Frame {
  std::vector<double> samples;
  std::size_t index = 0;  // zero-based frame number
  Channel channel = Channel::Left;
};

/// Non-negative power per DFT bin.
struct Spectrum {
  std::vector<double> bins;

  std::size_t size() const noexcept { return bins.size(); }
  double operator[](std::size_t k) const { return bins[k]; }
};

using ComplexVector = std::vector<std::complex<double>>;

/// Splits one channel into non-overlapping frames of `frame_len`; a trailing
/// partial frame is dropped.
std::vector<Frame> extract_frames(const AudioBuffer& buffer, std::size_t frame_len,
                                  Channel ch = Channel::Left);
std::vector<Frame> extract_frames(std::span<const double> samples, std::size_t frame_len,
                                  Channel ch = Channel::Left);

/// Forward DFT X(k) = sum_m x(m) e^{-i 2 pi m k / K} of the zero-padded input.
ComplexVector dft(std::span<const double> x, std::size_t dft_len);
ComplexVector dft(std::span<const std::complex<double>> x, std::size_t dft_len);
/// Inverse DFT including the 1/K factor.
ComplexVector idft(std::span<const std::complex<double>> spectrum);

/// |X(k)|^2 / M with M the frame length: squared magnitude of the unitary DFT.
Spectrum periodogram(std::span<const double> frame, std::size_t dft_len);
inline Spectrum periodogram(const Frame& frame, std::size_t dft_len) {
  return periodogram(frame.samples, dft_len);
}

/// Per-bin cross spectrum X_l(k) conj(X_r(k)) / M.
ComplexVector cross_spectrum(std::span<const double> left, std::span<const double> right,
                             std::size_t dft_len);

/// Biased estimator r(q) = (1/M) sum_n x(n) x(n-q), q = 0..max_lag.
std::vector<double> autocorrelation(std::span<const double> frame, std::size_t max_lag);

/// Analytic signal via DFT: negative-frequency bins zeroed, positive bins
/// doubled, DC and Nyquist kept. Frame length must be even.
ComplexVector analytic_signal(std::span<const double> frame);

double energy(std::span<const double> x) noexcept;

}  // namespace binaural
