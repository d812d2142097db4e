#include <doctest.h>

#include <cmath>
#include <vector>

#include "binaural/lpc.hpp"
#include "binaural/synth.hpp"

using namespace binaural;

namespace {

double power(const std::vector<double>& x) {
  double s = 0.0;
  for (const double v : x) s += v * v;
  return s;
}

}  // namespace

TEST_CASE("synthetic codebooks are valid and seeded") {
  const Codebook a = random_codebook(CodebookKind::Noise, 6, 8, 1);
  CHECK_NOTHROW(a.validate());
  CHECK(a.kind == CodebookKind::Noise);
  CHECK(a.size() == 6);
  CHECK(a.order == 8);
  CHECK(a == random_codebook(CodebookKind::Noise, 6, 8, 1));
  CHECK_FALSE(a == random_codebook(CodebookKind::Noise, 6, 8, 2));

  const Codebook f = formant_codebook(5, 10, 3);
  CHECK_NOTHROW(f.validate());
  CHECK(f.kind == CodebookKind::Speech);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(is_stable(f.model(i).coefficients));
  CHECK_NOTHROW(formant_codebook(2, 9, 3).validate());
}

TEST_CASE("formant codebook entries put their peaks inside the speech band") {
  const Codebook f = formant_codebook(8, 10, 4);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Spectrum env = ar_envelope(f.model(i), 400);
    std::size_t peak = 0;
    for (std::size_t k = 0; k <= 200; ++k)
      if (env[k] > env[peak]) peak = k;
    const double hz = 8000.0 * static_cast<double>(peak) / 400.0;
    CHECK(hz >= 150.0);
    CHECK(hz <= 3850.0);
  }
}

TEST_CASE("scene construction") {
  const Codebook sp = formant_codebook(4, 10, 5);
  const Codebook nz = random_codebook(CodebookKind::Noise, 3, 6, 6);
  SceneOptions o;
  o.length = 8100;
  o.snr_db = 3.0;
  o.seed = 7;
  const Scene s = make_scene(sp, nz, o);
  CHECK(s.clean_l.size() == 8100);
  CHECK(s.noisy_r.size() == 8100);
  CHECK(s.truth.size() == 41);
  CHECK(s.speech_entry.size() == 41);
  CHECK(s.clean_l == s.clean_r);
  for (std::size_t i = 0; i < 8100; ++i) {
    CHECK(s.noisy_l[i] == doctest::Approx(s.clean_l[i] + s.noise_l[i]));
    CHECK(s.noisy_r[i] == doctest::Approx(s.clean_r[i] + s.noise_r[i]));
  }
  const double snr = 10.0 * std::log10((power(s.clean_l) + power(s.clean_r)) /
                                       (power(s.noise_l) + power(s.noise_r)));
  CHECK(snr == doctest::Approx(3.0).epsilon(1e-9));

  std::size_t voiced = 0;
  for (std::size_t f = 0; f < s.truth.size(); ++f) {
    const auto& t = s.truth[f];
    CHECK(t.stp.speech == [&] {
      ArModel m = sp.model(s.speech_entry[f]);
      m.excitation_variance = t.stp.speech.excitation_variance;
      return m;
    }());
    if (t.pitch.voiced()) {
      ++voiced;
      const double f0 = t.pitch.f0_hz(8000.0);
      CHECK(f0 >= 95.0);
      CHECK(f0 <= 205.0);
      CHECK(t.pitch.voicing == doctest::Approx(0.9));
    }
  }
  CHECK(voiced > 0);
  CHECK(voiced < s.truth.size());

  const Scene again = make_scene(sp, nz, o);
  CHECK(again.noisy_l == s.noisy_l);
  o.seed = 8;
  CHECK_FALSE(make_scene(sp, nz, o).noisy_l == s.noisy_l);
}

TEST_CASE("scene noise coherence") {
  const Codebook sp = formant_codebook(2, 10, 5);
  const Codebook nz = random_codebook(CodebookKind::Noise, 1, 4, 6);
  SceneOptions o;
  o.length = 32000;
  o.noise_coherence = 1.0;
  Scene s = make_scene(sp, nz, o);
  CHECK(s.noise_l == s.noise_r);
  o.noise_coherence = 0.0;
  s = make_scene(sp, nz, o);
  double cross = 0.0;
  for (std::size_t i = 0; i < s.noise_l.size(); ++i) cross += s.noise_l[i] * s.noise_r[i];
  CHECK(std::abs(cross) / std::sqrt(power(s.noise_l) * power(s.noise_r)) < 0.1);
}
