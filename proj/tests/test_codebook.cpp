#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "binaural/codebook.hpp"
#include "binaural/errors.hpp"
#include "test_util.hpp"

using namespace binaural;

namespace {

std::vector<Frame> frames_of(const std::vector<double>& x, std::size_t len) {
  return extract_frames(std::span<const double>(x), len);
}

double lsf_distance(const LsfVector& a, const LsfVector& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.order(); ++i) d += (a.frequencies[i] - b.frequencies[i]) * (a.frequencies[i] - b.frequencies[i]);
  return std::sqrt(d);
}

Codebook random_codebook(std::size_t count, std::size_t order, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Codebook cb{CodebookKind::Speech, order, {}};
  for (std::size_t i = 0; i < count; ++i) {
    cb.entries.push_back(ar_to_lsf(ArModel{testutil::random_stable_ar(order, 0.9, rng), 1.0}));
  }
  return cb;
}

}  // namespace

TEST_CASE("single-centroid training recovers the generating model") {
  std::mt19937_64 rng(77);
  const auto a = testutil::random_stable_ar(14, 0.5, rng);
  const auto x = testutil::ar_process(a, 1e-3, 400 * 1000, 8);
  const auto frames = frames_of(x, 1000);

  // Oracle: LP fit to the autocorrelation of the whole pooled signal.
  const LsfVector pooled = ar_to_lsf(levinson_durbin(autocorrelation(x, 14)));

  const TrainResult tr = train_codebook(frames, 14, CodebookKind::Speech, {1, 3, 100, 1e-6});
  REQUIRE(tr.codebook.size() == 1);
  MESSAGE("distance to pooled LP: " << lsf_distance(tr.codebook.entries[0], pooled));
  CHECK(lsf_distance(tr.codebook.entries[0], pooled) < 0.01);
}

TEST_CASE("two-centroid training separates two processes") {
  const std::vector<double> low{1.2, -0.6};   // resonance near 0.16 pi
  const std::vector<double> high{-1.1, -0.5};  // resonance near 0.8 pi
  auto x1 = testutil::ar_process(low, 1.0, 200 * 150, 1);
  auto x2 = testutil::ar_process(high, 1.0, 200 * 150, 2);
  std::vector<Frame> frames;
  // Interleave frames of both classes.
  auto f1 = frames_of(x1, 200);
  auto f2 = frames_of(x2, 200);
  for (std::size_t i = 0; i < f1.size(); ++i) {
    frames.push_back(f1[i]);
    frames.push_back(f2[i]);
  }
  const TrainResult tr = train_codebook(frames, 2, CodebookKind::Speech, {2, 11, 100, 1e-6});
  const LsfVector l1 = ar_to_lsf(levinson_durbin(autocorrelation(x1, 2)));
  const LsfVector l2 = ar_to_lsf(levinson_durbin(autocorrelation(x2, 2)));
  const auto& c = tr.codebook.entries;
  const bool order01 = lsf_distance(c[0], l1) < lsf_distance(c[0], l2);
  const LsfVector& near1 = order01 ? c[0] : c[1];
  const LsfVector& near2 = order01 ? c[1] : c[0];
  CHECK(lsf_distance(near1, l1) < 0.1);
  CHECK(lsf_distance(near2, l2) < 0.1);
  CHECK(lsf_distance(l1, l2) > 1.0);
}

TEST_CASE("Lloyd distortion is non-increasing and centroids stay valid") {
  std::mt19937_64 rng(3);
  std::vector<LsfVector> data;
  for (int i = 0; i < 600; ++i) data.push_back(ar_to_lsf(ArModel{testutil::random_stable_ar(6, 0.9, rng), 1.0}));
  for (std::size_t size : {1u, 4u, 16u, 64u}) {
    const LloydResult r = lloyd(data, {size, 42, 100, 1e-6});
    REQUIRE(r.centroids.size() == size);
    for (std::size_t i = 1; i < r.distortion.size(); ++i) CHECK(r.distortion[i] <= r.distortion[i - 1]);
    for (const auto& c : r.centroids) CHECK(is_valid_lsf(c.frequencies));
  }
}

TEST_CASE("empty cells are repaired") {
  // Duplicate data: several initial centroids coincide, leaving empty cells.
  std::vector<LsfVector> data(20, LsfVector{{0.5, 1.0, 2.0}});
  for (int i = 0; i < 5; ++i) data.push_back(LsfVector{{0.6 + 0.01 * i, 1.1, 2.1}});
  const LloydResult r = lloyd(data, {6, 1, 100, 1e-6});
  CHECK(r.centroids.size() == 6);
  for (const auto& c : r.centroids) CHECK(is_valid_lsf(c.frequencies));
  for (std::size_t i = 1; i < r.distortion.size(); ++i) CHECK(r.distortion[i] <= r.distortion[i - 1]);
}

TEST_CASE("training is reproducible under a fixed seed") {
  const auto x = testutil::white_noise(200 * 300, 0.1, 5);
  std::vector<double> y(x);
  for (std::size_t i = 2; i < y.size(); ++i) y[i] += 0.5 * y[i - 1] - 0.3 * y[i - 2];
  const auto frames = frames_of(y, 200);
  const auto a = train_codebook(frames, 14, CodebookKind::Noise, {8, 99, 100, 1e-6});
  const auto b = train_codebook(frames, 14, CodebookKind::Noise, {8, 99, 100, 1e-6});
  CHECK(encode_codebook(a.codebook) == encode_codebook(b.codebook));
  CHECK(a.distortion == b.distortion);
}

TEST_CASE("training preconditions") {
  std::vector<double> silence(2000, 0.0);
  CHECK_THROWS_AS(train_codebook(frames_of(silence, 200), 14, CodebookKind::Speech, {1, 0, 100, 1e-6}),
                  std::invalid_argument);
  const auto x = testutil::white_noise(1000, 1.0, 1);
  CHECK_THROWS_AS(train_codebook(frames_of(x, 200), 4, CodebookKind::Speech, {6, 0, 100, 1e-6}),
                  std::invalid_argument);
  CHECK_THROWS_AS(lloyd(std::vector<LsfVector>(3, LsfVector{{1.0}}), {0, 0, 10, 1e-6}), std::invalid_argument);
}

TEST_CASE("CBK1 encoding") {
  const Codebook cb = random_codebook(64, 14, 12);
  const auto bytes = encode_codebook(cb);
  CHECK(bytes.size() == 13 + 64 * 14 * 8);
  CHECK(bytes[0] == 'C');
  CHECK(bytes[3] == '1');
  CHECK(bytes[4] == 1);   // version LE
  CHECK(bytes[6] == 0);   // speech
  CHECK(bytes[7] == 14);  // order LE
  CHECK(bytes[9] == 64);  // count LE
  CHECK(decode_codebook(bytes) == cb);

  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = bad[1] = bad[2] = bad[3] = 'X';
    try {
      decode_codebook(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("truncated entry table names an offset") {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 5);
    try {
      decode_codebook(cut);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == cut.size());
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }
  SUBCASE("order mismatch") {
    CHECK_THROWS_AS(decode_codebook(bytes, 10), FormatError);
    CHECK_NOTHROW(decode_codebook(bytes, 14));
  }
  SUBCASE("non-monotone entry") {
    auto bad = bytes;
    std::swap_ranges(bad.begin() + 13, bad.begin() + 21, bad.begin() + 21);
    CHECK_THROWS_AS(decode_codebook(bad), FormatError);
  }
  SUBCASE("trailing garbage and bad version") {
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(decode_codebook(extra), FormatError);
    auto v2 = bytes;
    v2[4] = 2;
    CHECK_THROWS_AS(decode_codebook(v2), FormatError);
  }
}

TEST_CASE("save/load round trip is bit exact") {
  const Codebook cb = random_codebook(8, 14, 4);
  const auto path = std::filesystem::temp_directory_path() / "binaural_test_roundtrip.cbk";
  save_codebook(cb, path);
  const Codebook back = load_codebook(path, 14);
  CHECK(back == cb);
  std::ifstream in(path, std::ios::binary);
  const std::vector<std::uint8_t> disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(disk == encode_codebook(cb));
  std::filesystem::remove(path);
  CHECK_THROWS(load_codebook(path));
}
