#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "binaural/codebook.hpp"
#include "binaural/kalman.hpp"

namespace binaural {

/// Codebook of random stable AR shapes: reflection coefficients uniform in
/// (-max_reflection, max_reflection), the first one drawn from
/// (first_min, max_reflection) to give a low-pass tilt.
Codebook random_codebook(CodebookKind kind, std::size_t size, std::size_t order,
                         std::uint64_t seed, double max_reflection = 0.9, double first_min = 0.0);

/// Speech-like codebook: each entry places order/2 resonances, one per
/// equal-width band of [200, 3800] Hz (jittered), with bandwidths of
/// 60..250 Hz. An odd order adds a real pole at 0.
Codebook formant_codebook(std::size_t size, std::size_t order, std::uint64_t seed,
                          double sample_rate = 8000.0);

struct SceneOptions {
  std::size_t length = 16000;
  int sample_rate = 8000;
  std::size_t frame_len = 200;
  double snr_db = 5.0;  // total clean power over total noise power, both ears
  std::uint64_t seed = 1;
  std::size_t speech_segment_frames = 4;  // frames per speech shape/level
  double level_spread_db = 20.0;          // speech level drawn uniformly over this range
  double voiced_fraction = 0.5;           // share of speech segments with periodic excitation
  double voicing_gain = 0.9;              // b in u(n) = b u(n-p) + d(n)
  double f0_min_hz = 100.0;
  double f0_max_hz = 200.0;
  std::size_t noise_segment_frames = 20;  // frames per noise shape
  double noise_coherence = 0.2;           // share of noise power common to both ears
};

/// Both ears receive the same speech (source in the nose direction); the
/// noise is the sum of a common and an ear-specific AR component with the
/// same shape. `truth` holds per-frame true parameters; its speech variance
/// is the variance of the excitation u, its noise variance the per-ear
/// excitation variance after SNR scaling.
struct Scene {
  int sample_rate = 8000;
  std::vector<double> clean_l, clean_r;
  std::vector<double> noise_l, noise_r;
  std::vector<double> noisy_l, noisy_r;
  std::vector<FrameParameters> truth;
  std::vector<std::size_t> speech_entry;  // per frame
  std::vector<std::size_t> noise_entry;   // per frame
};

Scene make_scene(const Codebook& speech, const Codebook& noise, const SceneOptions& options);

}  // namespace binaural
