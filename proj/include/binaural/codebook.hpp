#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "binaural/lpc.hpp"
#include "binaural/signal.hpp"

namespace binaural {

enum class CodebookKind : std::uint8_t { Speech = 0, Noise = 1 };

/// Spectral-shape codebook; each entry is an LSF vector of the same order.
struct Codebook {
  CodebookKind kind = CodebookKind::Speech;
  std::size_t order = 0;
  std::vector<LsfVector> entries;

  std::size_t size() const noexcept { return entries.size(); }
  ArModel model(std::size_t i) const { return lsf_to_ar(entries.at(i)); }

  /// Throws std::invalid_argument unless non-empty with valid entries of `order`.
  void validate() const;

  friend bool operator==(const Codebook&, const Codebook&) = default;
};

struct LloydOptions {
  std::size_t size = 8;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // stop when relative distortion change drops below
};

struct LloydResult {
  std::vector<LsfVector> centroids;
  std::vector<double> distortion;  // mean squared LSF distance, one per iteration
};

/// Generalized Lloyd algorithm in LSF space under squared Euclidean distance.
LloydResult lloyd(std::span<const LsfVector> data, const LloydOptions& options);

/// Frames with less energy than this are treated as silence and skipped.
inline constexpr double kSilenceEnergy = 1e-8;

/// Windowed LP analysis of each usable frame, returned as LSFs.
std::vector<LsfVector> training_vectors(std::span<const Frame> frames, std::size_t order);

struct TrainResult {
  Codebook codebook;
  std::vector<double> distortion;
};

/// Throws std::invalid_argument if fewer than `options.size` frames are usable.
TrainResult train_codebook(std::span<const Frame> frames, std::size_t order, CodebookKind kind,
                           const LloydOptions& options);

// CBK1 binary format, little endian:
//   "CBK1" | u16 version = 1 | u8 kind | u16 order | u32 count | count*order f64
std::vector<std::uint8_t> encode_codebook(const Codebook& cb);
/// Throws FormatError naming the byte offset of the first problem.
Codebook decode_codebook(std::span<const std::uint8_t> bytes,
                         std::optional<std::size_t> expected_order = std::nullopt);

void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path,
                       std::optional<std::size_t> expected_order = std::nullopt);

}  // namespace binaural
