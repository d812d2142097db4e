#pragma once

// Test-only helpers: seeded generators and brute-force oracles that do not
// share code paths with the library implementation.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace testutil {

inline std::vector<double> white_noise(std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

/// x(n) = sum a_i x(n-i) + e(n), discarding `burn_in` leading samples.
inline std::vector<double> ar_process(const std::vector<double>& a, double sigma2, std::size_t n,
                                      std::uint64_t seed, std::size_t burn_in = 2000) {
  const auto e = white_noise(n + burn_in, std::sqrt(sigma2), seed);
  std::vector<double> x(n + burn_in, 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = e[t];
    for (std::size_t i = 0; i < a.size() && i < t; ++i) acc += a[i] * x[t - 1 - i];
    x[t] = acc;
  }
  return {x.begin() + static_cast<std::ptrdiff_t>(burn_in), x.end()};
}

/// Random reflection coefficients in (-kmax, kmax), stepped up to prediction form.
inline std::vector<double> random_stable_ar(std::size_t order, double kmax, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-kmax, kmax);
  std::vector<double> a;
  for (std::size_t i = 0; i < order; ++i) {
    const double k = dist(rng);
    std::vector<double> next(i + 1);
    for (std::size_t j = 0; j < i; ++j) next[j] = a[j] - k * a[i - 1 - j];
    next[i] = k;
    a = next;
  }
  return a;
}

/// Direct O(K^2) DFT, X(k) = sum x(m) e^{-i 2 pi m k / K}.
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                                   std::size_t K) {
  std::vector<std::complex<double>> X(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t m = 0; m < x.size(); ++m) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(m * k % K) / static_cast<double>(K);
      acc += x[m] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    X[k] = acc;
  }
  return X;
}

inline std::vector<std::complex<double>> to_complex(const std::vector<double>& x) {
  return {x.begin(), x.end()};
}

/// |1 - sum a_i e^{-i w i}|^-2 evaluated directly.
inline double ar_power_response(const std::vector<double>& a, double w) {
  std::complex<double> A = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    A -= a[i] * std::polar(1.0, -w * static_cast<double>(i + 1));
  }
  return 1.0 / std::norm(A);
}

/// K-bin envelope evaluated directly from the transfer function.
inline std::vector<double> ar_envelope_direct(const std::vector<double>& a, std::size_t K) {
  std::vector<double> e(K);
  for (std::size_t k = 0; k < K; ++k) {
    e[k] = ar_power_response(a, 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(K));
  }
  return e;
}

/// |DFT|^2 / M of a real frame via the naive DFT.
inline std::vector<double> naive_periodogram(const std::vector<double>& x, std::size_t K) {
  const auto X = naive_dft(to_complex(x), K);
  std::vector<double> p(K);
  for (std::size_t k = 0; k < K; ++k) p[k] = std::norm(X[k]) / static_cast<double>(x.size());
  return p;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Non-causal Wiener filter for AR speech in white noise: the impulse
// response is sampled from the true spectra on a fine grid, truncated, and
// applied by direct convolution.
inline std::vector<double> wiener_oracle(const std::vector<double>& z, const std::vector<double>& a,
                                  double sigma_d2, double sigma_v2) {
  const std::size_t grid = 16384;
  const int half = 400;
  std::vector<double> gain(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / grid;
    std::complex<double> inv = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      inv -= a[i] * std::polar(1.0, -w * static_cast<double>(i + 1));
    const double ps = sigma_d2 / std::norm(inv);
    gain[k] = ps / (ps + sigma_v2);
  }
  std::vector<double> h(2 * half + 1);
  for (int t = -half; t <= half; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < grid; ++k)
      acc += gain[k] * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) * t / grid);
    h[static_cast<std::size_t>(t + half)] = acc / grid;
  }
  std::vector<double> out(z.size(), 0.0);
  for (std::size_t n = 0; n < z.size(); ++n) {
    double acc = 0.0;
    for (int t = -half; t <= half; ++t) {
      const auto m = static_cast<std::ptrdiff_t>(n) - t;
      if (m >= 0 && m < static_cast<std::ptrdiff_t>(z.size()))
        acc += h[static_cast<std::size_t>(t + half)] * z[static_cast<std::size_t>(m)];
    }
    out[n] = acc;
  }
  return out;
}

}  // namespace testutil
