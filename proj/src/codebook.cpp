#include "binaural/codebook.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "binaural/errors.hpp"

namespace binaural {

void Codebook::validate() const {
  if (entries.empty()) throw std::invalid_argument("codebook has no entries");
  for (const auto& e : entries) {
    if (e.order() != order) throw std::invalid_argument("codebook entry order mismatch");
    if (!is_valid_lsf(e.frequencies)) throw std::invalid_argument("codebook entry is not a valid LSF vector");
  }
}

namespace {

double squared_distance(const LsfVector& a, const LsfVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.frequencies.size(); ++i) {
    const double t = a.frequencies[i] - b.frequencies[i];
    d += t * t;
  }
  return d;
}

}  // namespace

LloydResult lloyd(std::span<const LsfVector> data, const LloydOptions& options) {
  const std::size_t n = data.size();
  const std::size_t k = options.size;
  if (k == 0) throw std::invalid_argument("codebook size must be positive");
  if (n < k) {
    throw std::invalid_argument("need at least " + std::to_string(k) + " training vectors, got " +
                                std::to_string(n));
  }
  const std::size_t dim = data.front().order();
  for (const auto& v : data) {
    if (v.order() != dim) throw std::invalid_argument("training vectors differ in order");
  }

  // Partial Fisher-Yates with raw engine output so the selection does not
  // depend on the standard library's distribution implementations.
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> index(n);
  for (std::size_t i = 0; i < n; ++i) index[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(index[i], index[j]);
  }
  LloydResult result;
  result.centroids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) result.centroids.push_back(data[index[i]]);

  std::vector<std::size_t> assignment(n);
  std::vector<std::size_t> counts(k);
  std::vector<double> cell_distortion(k);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(cell_distortion.begin(), cell_distortion.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(data[i], result.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assignment[i] = best;
      ++counts[best];
      cell_distortion[best] += best_d;
      total += best_d;
    }
    const double mean = total / static_cast<double>(n);
    result.distortion.push_back(mean);

    const std::size_t t = result.distortion.size();
    if (t >= 2) {
      const double prev = result.distortion[t - 2];
      if (prev <= 0.0 || (prev - mean) / prev < options.tolerance) break;
    }
    if (mean == 0.0) break;

    // Centroid update: mean of member LSF vectors (a convex combination of
    // increasing vectors in (0, pi) stays increasing in (0, pi)).
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += data[i].frequencies[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        result.centroids[c].frequencies[d] = sums[c][d] / static_cast<double>(counts[c]);
      }
    }
    // Empty cells: place the centroid next to the one with the highest
    // distortion so the next assignment splits that cell.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t worst = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (cell_distortion[j] > cell_distortion[worst]) worst = j;
      }
      LsfVector split = result.centroids[worst];
      const double delta = split.frequencies.back() + 1e-4 < std::numbers::pi ? 1e-4 : -1e-4;
      for (auto& w : split.frequencies) w += delta;
      if (!is_valid_lsf(split.frequencies)) split = result.centroids[worst];
      result.centroids[c] = std::move(split);
      cell_distortion[worst] *= 0.5;
      cell_distortion[c] = cell_distortion[worst];
    }
  }
  return result;
}

std::vector<LsfVector> training_vectors(std::span<const Frame> frames, std::size_t order) {
  std::vector<LsfVector> out;
  out.reserve(frames.size());
  std::vector<double> windowed;
  for (const Frame& frame : frames) {
    const std::size_t m = frame.samples.size();
    if (m <= order || energy(frame.samples) < kSilenceEnergy) continue;
    windowed.resize(m);
    for (std::size_t n = 0; n < m; ++n) {
      const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                              static_cast<double>(m - 1));
      windowed[n] = frame.samples[n] * w;
    }
    try {
      out.push_back(ar_to_lsf(levinson_durbin(autocorrelation(windowed, order))));
    } catch (const NumericalError&) {
      // numerically singular frame (e.g. a pure tone): not usable for training
    }
  }
  return out;
}

TrainResult train_codebook(std::span<const Frame> frames, std::size_t order, CodebookKind kind,
                           const LloydOptions& options) {
  if (order == 0) throw std::invalid_argument("LP order must be positive");
  const std::vector<LsfVector> data = training_vectors(frames, order);
  if (data.size() < options.size) {
    throw std::invalid_argument("only " + std::to_string(data.size()) +
                                " usable training frames for a codebook of size " +
                                std::to_string(options.size));
  }
  LloydResult lr = lloyd(data, options);
  TrainResult out;
  out.codebook = Codebook{kind, order, std::move(lr.centroids)};
  out.distortion = std::move(lr.distortion);
  return out;
}

namespace {

constexpr char kMagic[4] = {'C', 'B', 'K', '1'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 2 + 1 + 2 + 4;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  const auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{bytes[offset + i]} << (8 * i));
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_codebook(const Codebook& cb) {
  cb.validate();
  if (cb.order > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("order too large");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeaderSize + cb.size() * cb.order * 8);
  put_le<std::uint16_t>(out, kVersion);
  out.push_back(static_cast<std::uint8_t>(cb.kind));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(cb.order));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cb.size()));
  for (const auto& e : cb.entries) {
    for (double w : e.frequencies) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(w));
  }
  return out;
}

Codebook decode_codebook(std::span<const std::uint8_t> bytes, std::optional<std::size_t> expected_order) {
  if (bytes.size() < 4) throw FormatError("codebook truncated inside magic", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad codebook magic", 0);
  if (bytes.size() < kHeaderSize) throw FormatError("codebook header truncated", bytes.size());
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kVersion) throw FormatError("unsupported codebook version " + std::to_string(version), 4);
  const std::uint8_t kind = bytes[6];
  if (kind > 1) throw FormatError("unknown codebook kind " + std::to_string(kind), 6);
  const std::size_t order = get_le<std::uint16_t>(bytes, 7);
  if (order == 0) throw FormatError("codebook order is zero", 7);
  if (expected_order && *expected_order != order) {
    throw FormatError("codebook order " + std::to_string(order) + " does not match expected " +
                          std::to_string(*expected_order),
                      7);
  }
  const std::size_t count = get_le<std::uint32_t>(bytes, 9);
  if (count == 0) throw FormatError("codebook has no entries", 9);

  Codebook cb;
  cb.kind = static_cast<CodebookKind>(kind);
  cb.order = order;
  cb.entries.reserve(count);
  std::size_t offset = kHeaderSize;
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t entry_offset = offset;
    if (bytes.size() - offset < order * 8) {
      throw FormatError("codebook entry table truncated at entry " + std::to_string(e), bytes.size());
    }
    LsfVector lsf;
    lsf.frequencies.resize(order);
    for (std::size_t i = 0; i < order; ++i, offset += 8) {
      lsf.frequencies[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
    }
    if (!is_valid_lsf(lsf.frequencies)) {
      throw FormatError("codebook entry " + std::to_string(e) + " is not a valid LSF vector", entry_offset);
    }
    cb.entries.push_back(std::move(lsf));
  }
  if (offset != bytes.size()) throw FormatError("trailing bytes after codebook entries", offset);
  return cb;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
  const auto bytes = encode_codebook(cb);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path, std::optional<std::size_t> expected_order) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open codebook " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_codebook(bytes, expected_order);
}

}  // namespace binaural
