#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "binaural/errors.hpp"
#include "binaural/metrics.hpp"
#include "test_util.hpp"

using namespace binaural;

namespace {

std::vector<double> scaled(std::vector<double> x, double g) {
  for (auto& v : x) v *= g;
  return x;
}

std::vector<double> added(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> o(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] + b[i];
  return o;
}

// Right channel circularly delayed by one sample inside every frame.
std::vector<double> frame_rotate(const std::vector<double>& x, std::size_t m) {
  std::vector<double> o(x.size());
  for (std::size_t s = 0; s + m <= x.size(); s += m)
    for (std::size_t i = 0; i < m; ++i) o[s + (i + 1) % m] = x[s + i];
  return o;
}

// Direct ITD formula with naive DFTs.
double itd_oracle(const std::vector<double>& cl, const std::vector<double>& cr,
                  const std::vector<double>& el, const std::vector<double>& er, std::size_t m) {
  const auto spec = [&](const std::vector<double>& x, std::size_t s) {
    std::vector<std::complex<double>> v(x.begin() + static_cast<std::ptrdiff_t>(s),
                                        x.begin() + static_cast<std::ptrdiff_t>(s + m));
    return testutil::naive_dft(v, m);
  };
  std::vector<std::vector<std::complex<double>>> cc, ce;
  double peak = 0.0;
  for (std::size_t s = 0; s + m <= cl.size(); s += m) {
    const auto a = spec(cl, s), b = spec(cr, s), c = spec(el, s), d = spec(er, s);
    std::vector<std::complex<double>> x(m), y(m);
    for (std::size_t k = 0; k < m; ++k) {
      x[k] = a[k] * std::conj(b[k]);
      y[k] = c[k] * std::conj(d[k]);
      peak = std::max(peak, std::abs(x[k]));
    }
    cc.push_back(x);
    ce.push_back(y);
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < cc.size(); ++f)
    for (std::size_t k = 0; k < m; ++k) {
      if (std::abs(cc[f][k]) <= 1e-10 * peak) continue;
      double d = std::arg(ce[f][k]) - std::arg(cc[f][k]);
      while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
      while (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
      sum += std::abs(d) / std::numbers::pi;
      ++n;
    }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("segmental SNR reference points") {
  const auto s = testutil::white_noise(4000, 1.0, 1);
  CHECK(segmental_snr(s, s) == doctest::Approx(kSegSnrMax));

  // per-segment equal-power noise: every segment is exactly 0 dB
  auto n = testutil::white_noise(4000, 1.0, 2);
  for (std::size_t st = 0; st < n.size(); st += 200) {
    double ps = 0.0, pn = 0.0;
    for (std::size_t i = st; i < st + 200; ++i) {
      ps += s[i] * s[i];
      pn += n[i] * n[i];
    }
    for (std::size_t i = st; i < st + 200; ++i) n[i] *= std::sqrt(ps / pn);
  }
  CHECK(segmental_snr(s, added(s, n)) == doctest::Approx(0.0).epsilon(1e-9));

  // stationary mixture scaled globally to 5 dB
  const auto s2 = testutil::white_noise(40000, 1.0, 3);
  const auto n2 = testutil::white_noise(40000, 1.0, 4);
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < s2.size(); ++i) {
    ps += s2[i] * s2[i];
    pn += n2[i] * n2[i];
  }
  const auto mix = added(s2, scaled(n2, std::sqrt(ps / pn / std::pow(10.0, 0.5))));
  CHECK(std::abs(segmental_snr(s2, mix) - 5.0) < 0.2);
}

TEST_CASE("segmental SNR clamps and edge cases") {
  const std::vector<double> zero(400, 0.0);
  const auto s = testutil::white_noise(400, 1.0, 5);
  CHECK(segmental_snr(zero, zero) == doctest::Approx(kSegSnrMax));
  CHECK(segmental_snr(zero, s) == doctest::Approx(kSegSnrMin));
  CHECK(segmental_snr(s, scaled(s, -100.0)) == doctest::Approx(kSegSnrMin));
  // trailing partial segment counts as a segment
  const auto t = testutil::white_noise(250, 1.0, 6);
  auto u = t;
  for (std::size_t i = 200; i < 250; ++i) u[i] = 0.0;
  CHECK(segmental_snr(t, u) == doctest::Approx(0.5 * (kSegSnrMax + 0.0)));

  CHECK_THROWS_AS(segmental_snr(s, std::span<const double>(zero).first(10)), std::invalid_argument);
  CHECK_THROWS_AS(segmental_snr(std::span<const double>{}, std::span<const double>{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(segmental_snr(s, s, 0), std::invalid_argument);
}

TEST_CASE("interaural errors vanish for a common gain") {
  const auto l = testutil::ar_process({1.2, -0.5}, 1.0, 4000, 7);
  const auto r = testutil::ar_process({0.4}, 1.0, 4000, 8);
  auto rep = interaural_errors(l, r, l, r);
  CHECK(rep.itd_error == doctest::Approx(0.0));
  CHECK(rep.ild_error == doctest::Approx(0.0));
  rep = interaural_errors(l, r, scaled(l, 0.3), scaled(r, 0.3));
  CHECK(rep.itd_error < 1e-12);
  CHECK(rep.ild_error < 1e-12);
}

TEST_CASE("one-sample interaural delay") {
  const std::size_t m = 200;
  const auto l = testutil::white_noise(4000, 1.0, 9);
  const auto r = testutil::white_noise(4000, 1.0, 10);

  // circular delay: phase ramp 2 pi k / M, whose wrapped mean |.|/pi is 1/2
  const auto rot = frame_rotate(r, m);
  CHECK(interaural_errors(l, r, l, rot).itd_error == doctest::Approx(0.5).epsilon(1e-9));

  std::vector<double> lin(r.size(), 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) lin[i] = r[i - 1];
  const double got = interaural_errors(l, r, l, lin).itd_error;
  CHECK(got > 0.05);
  CHECK(got == doctest::Approx(itd_oracle(l, r, l, lin, m)).epsilon(1e-9));
}

TEST_CASE("interaural error symmetries and ILD") {
  const auto l = testutil::white_noise(2000, 1.0, 11);
  const auto r = testutil::white_noise(2000, 0.5, 12);
  const auto el = added(l, testutil::white_noise(2000, 0.3, 13));
  const auto er = added(r, testutil::white_noise(2000, 0.3, 14));
  const auto a = interaural_errors(l, r, el, er);
  const auto b = interaural_errors(r, l, er, el);
  CHECK(a.itd_error == doctest::Approx(b.itd_error).epsilon(1e-12));
  CHECK(a.itd_error >= 0.0);
  CHECK(a.itd_error <= 1.0);

  const auto rep = interaural_errors(l, r, l, scaled(r, 2.0));
  CHECK(rep.ild_error == doctest::Approx(20.0 * std::log10(2.0)));
  CHECK(rep.itd_error < 1e-12);
}

TEST_CASE("interaural error failures") {
  const auto x = testutil::white_noise(400, 1.0, 15);
  const std::vector<double> z(400, 0.0);
  CHECK_THROWS_AS(interaural_errors(x, x, x, z), UndefinedMetric);
  CHECK_THROWS_AS(interaural_errors(z, x, x, x), UndefinedMetric);
  CHECK_THROWS_AS(interaural_errors(x, x, x, std::span<const double>(x).first(300)),
                  std::invalid_argument);
  CHECK_THROWS_AS(interaural_errors(std::span<const double>(x).first(100),
                                    std::span<const double>(x).first(100),
                                    std::span<const double>(x).first(100),
                                    std::span<const double>(x).first(100)),
                  std::invalid_argument);
}
