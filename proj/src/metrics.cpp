#include "binaural/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "binaural/errors.hpp"
#include "binaural/signal.hpp"

namespace binaural {

double segmental_snr(std::span<const double> clean, std::span<const double> processed,
                     std::size_t seg_len) {
  if (clean.size() != processed.size())
    throw std::invalid_argument("segmental_snr: length mismatch");
  if (seg_len == 0) throw std::invalid_argument("segmental_snr: segment length is zero");
  if (clean.empty()) throw std::invalid_argument("segmental_snr: empty input");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < clean.size(); start += seg_len) {
    const std::size_t end = std::min(clean.size(), start + seg_len);
    double sig = 0.0, err = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      sig += clean[i] * clean[i];
      const double e = clean[i] - processed[i];
      err += e * e;
    }
    double snr = kSegSnrMax;
    if (err > 0.0) snr = sig > 0.0 ? 10.0 * std::log10(sig / err) : kSegSnrMin;
    total += std::clamp(snr, kSegSnrMin, kSegSnrMax);
    ++count;
  }
  return total / static_cast<double>(count);
}

namespace {

std::vector<ComplexVector> frame_cross(std::span<const double> l, std::span<const double> r,
                                       std::size_t m) {
  std::vector<ComplexVector> out;
  for (std::size_t start = 0; start + m <= l.size(); start += m)
    out.push_back(cross_spectrum(l.subspan(start, m), r.subspan(start, m), m));
  return out;
}

}  // namespace

InterauralReport interaural_errors(std::span<const double> clean_l, std::span<const double> clean_r,
                                   std::span<const double> enh_l, std::span<const double> enh_r,
                                   std::size_t frame_len) {
  const std::size_t n = clean_l.size();
  if (clean_r.size() != n || enh_l.size() != n || enh_r.size() != n)
    throw std::invalid_argument("interaural_errors: length mismatch");
  if (frame_len == 0 || n < frame_len)
    throw std::invalid_argument("interaural_errors: input shorter than one frame");
  const double pcl = energy(clean_l), pcr = energy(clean_r);
  const double pel = energy(enh_l), per = energy(enh_r);
  if (pcl <= 0.0 || pcr <= 0.0 || pel <= 0.0 || per <= 0.0)
    throw UndefinedMetric("interaural_errors: a channel has zero power");

  InterauralReport rep;
  rep.ild_error = std::abs(10.0 * std::log10((pel / per) / (pcl / pcr)));

  const auto cc = frame_cross(clean_l, clean_r, frame_len);
  const auto ce = frame_cross(enh_l, enh_r, frame_len);
  double peak = 0.0;
  for (const auto& fr : cc)
    for (const auto& v : fr) peak = std::max(peak, std::abs(v));
  const double gate = 1e-10 * peak;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < cc.size(); ++f) {
    for (std::size_t k = 0; k < frame_len; ++k) {
      if (!(std::abs(cc[f][k]) > gate)) continue;
      // Phase of C_enh * conj(C_clean) is the wrapped difference in (-pi, pi].
      const double d = std::arg(ce[f][k] * std::conj(cc[f][k]));
      sum += std::abs(d) / std::numbers::pi;
      ++count;
    }
  }
  if (count == 0) throw UndefinedMetric("interaural_errors: clean cross spectrum vanishes");
  rep.itd_error = sum / static_cast<double>(count);
  return rep;
}

}  // namespace binaural
