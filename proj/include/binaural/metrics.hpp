#pragma once

#include <cstddef>
#include <span>

namespace binaural {

inline constexpr double kSegSnrMin = -10.0;
inline constexpr double kSegSnrMax = 35.0;

/// Mean over non-overlapping segments of 10 log10(|s|^2 / |s - s_hat|^2),
/// each clamped to [-10, 35] dB. A trailing partial segment is included.
/// A segment where both norms are zero counts as the ceiling.
double segmental_snr(std::span<const double> clean, std::span<const double> processed,
                     std::size_t seg_len = 200);

struct InterauralReport {
  double itd_error = 0.0;  // mean |wrapped phase difference| / pi, in [0, 1]
  double ild_error = 0.0;  // dB
};

/// Frame-wise cross spectra (non-overlapping frames, DFT length = frame_len).
/// Bins whose clean cross-spectrum magnitude is below 1e-10 of the largest
/// are left out of the ITD average. Throws UndefinedMetric for a silent channel.
InterauralReport interaural_errors(std::span<const double> clean_l, std::span<const double> clean_r,
                                   std::span<const double> enh_l, std::span<const double> enh_r,
                                   std::size_t frame_len = 200);

}  // namespace binaural
