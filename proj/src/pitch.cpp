#include "binaural/pitch.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "binaural/simd.hpp"

namespace binaural {

using cd = std::complex<double>;

double PitchInfo::f0_hz(double sample_rate) const {
  return voiced() ? omega0 * sample_rate / (2.0 * std::numbers::pi) : 0.0;
}

DirectivityModel DirectivityModel::identity() { return {}; }

DirectivityModel DirectivityModel::pure_delay(double right_delay_samples) {
  if (!std::isfinite(right_delay_samples)) throw std::invalid_argument("directivity: delay must be finite");
  DirectivityModel d;
  d.delay_r_ = right_delay_samples;
  return d;
}

DirectivityModel& DirectivityModel::with_magnitudes(double left, double right) {
  if (!(left > 0.0) || !(right > 0.0) || !std::isfinite(left) || !std::isfinite(right)) {
    throw std::invalid_argument("directivity: magnitudes must be positive and finite");
  }
  mag_l_ = left;
  mag_r_ = right;
  return *this;
}

cd DirectivityModel::left_gain(double omega) const { return std::polar(mag_l_, -omega * delay_l_); }
cd DirectivityModel::right_gain(double omega) const { return std::polar(mag_r_, -omega * delay_r_); }

bool DirectivityModel::symmetric() const noexcept { return delay_l_ == delay_r_ && mag_l_ == mag_r_; }

std::vector<double> prewhiten(std::span<const double> frame, std::span<const double> history,
                              const ArModel& noise) {
  const auto& c = noise.coefficients;
  std::vector<double> out(frame.size());
  const auto past = [&](std::ptrdiff_t idx) -> double {
    if (idx >= 0) return frame[static_cast<std::size_t>(idx)];
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(history.size()) + idx;
    return h >= 0 ? history[static_cast<std::size_t>(h)] : 0.0;
  };
  for (std::size_t n = 0; n < frame.size(); ++n) {
    double acc = frame[n];
    for (std::size_t i = 0; i < c.size(); ++i) {
      acc -= c[i] * past(static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(i + 1));
    }
    out[n] = acc;
  }
  return out;
}

namespace {

struct Ears {
  std::vector<std::span<const cd>> ch;
  std::size_t m = 0;

  Ears(std::span<const cd> left, std::span<const cd> right) {
    if (left.empty()) throw std::invalid_argument("pitch: empty frame");
    if (!right.empty() && right.size() != left.size()) throw std::invalid_argument("pitch: channel lengths differ");
    ch.push_back(left);
    if (!right.empty()) ch.push_back(right);
    m = left.size();
  }
  std::size_t count() const { return ch.size(); }
};

cd ear_gain(const DirectivityModel& d, std::size_t ear, double omega) {
  return ear == 0 ? d.left_gain(omega) : d.right_gain(omega);
}

// Stacked column for harmonic p: [g_l(p w0) e^{i p w0 m}; g_r(p w0) e^{i p w0 m}].
void harmonic_column(const Ears& ears, double omega0, std::size_t p, const DirectivityModel& d, cd* out) {
  const double w = omega0 * static_cast<double>(p);
  const cd step = std::polar(1.0, w);
  for (std::size_t e = 0; e < ears.count(); ++e) {
    cd ph = ear_gain(d, e, w);
    cd* col = out + e * ears.m;
    for (std::size_t n = 0; n < ears.m; ++n) {
      // re-anchor periodically so the recurrence cannot drift
      if ((n & 63) == 0) ph = ear_gain(d, e, w) * std::polar(1.0, w * static_cast<double>(n));
      col[n] = ph;
      ph *= step;
    }
  }
}

void check_omega(double omega0) {
  if (!(omega0 > 0.0) || !(omega0 < 2.0 * std::numbers::pi)) {
    throw std::invalid_argument("pitch: omega0 must be in (0, 2 pi)");
  }
}

constexpr double kVarianceFloor = 1e-300;

double criterion(double sum_log_var, std::size_t m, std::size_t ears, std::size_t order) {
  const double n_obs = static_cast<double>(m * ears);
  return static_cast<double>(m) * sum_log_var + 3.0 * static_cast<double>(order) * std::log(n_obs);
}

// Sum_m x[m] e^{-i w m} by the Goertzel recursion.
cd dtft_at(std::span<const cd> x, double w) {
  const double c = 2.0 * std::cos(w);
  cd s1 = 0.0, s2 = 0.0;
  for (const cd& v : x) {
    const cd s0 = v + c * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  const cd y = s1 - std::polar(1.0, -w) * s2;
  return y * std::polar(1.0, -w * static_cast<double>(x.size() - 1));
}

// Sum_{m<M} e^{i t m}
cd dirichlet(double t, std::size_t m) {
  const double half = 0.5 * t;
  const double s = std::sin(half);
  const double md = static_cast<double>(m);
  if (std::abs(s) < 1e-12) return {md, 0.0};  // t is a multiple of 2 pi
  return std::polar(std::sin(md * half) / s, half * (md - 1.0));
}

// Order-recursive least squares over harmonics 1..L using the closed-form
// Gram matrix of the harmonic columns and a Cholesky factor whose leading
// blocks are the factors for every lower order.
class OrderSweep {
 public:
  OrderSweep(const Ears& ears, std::size_t max_order) : ears_(ears), cap_(max_order) {
    for (const auto& c : ears.ch) {
      double e = 0.0;
      for (const cd& v : c) e += std::norm(v);
      ear_energy_.push_back(e);
      total_energy_ += e;
    }
    const std::size_t ne = ears.count();
    gains_.resize(ne * cap_);
    b_ear_.resize(ne * cap_);
    g_ear_.resize(ne * cap_ * cap_);
    chol_.resize(cap_ * cap_);
    z_.resize(cap_);
    q_.resize(cap_);
    dk_.resize(cap_);
    beta_.resize(ne * cap_);
    share_.resize(ne);
    cross_.resize(ne);
  }

  double total_energy() const { return total_energy_; }

  struct Step {
    double sum_log_var;
    double residual_energy;
  };

  const std::vector<Step>& run(double omega0, std::size_t max_order, const DirectivityModel& d) {
    const std::size_t ne = ears_.count();
    const std::size_t m = ears_.m;
    const std::size_t lmax = std::min(max_order, cap_);
    steps_.clear();
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t p = 0; p < lmax; ++p) {
        const double w = omega0 * static_cast<double>(p + 1);
        const cd g = ear_gain(d, e, w);
        gains_[e * cap_ + p] = g;
        b_ear_[e * cap_ + p] = std::conj(g) * dtft_at(ears_.ch[e], w);
      }
    }
    // Gram entries are conj(g_p) g_q D((q - p) w0); D depends on q - p only.
    for (std::size_t k = 0; k < lmax; ++k) dk_[k] = dirichlet(omega0 * static_cast<double>(k), m);
    const auto ear_gram = [&](std::size_t e, std::size_t p, std::size_t q) {
      const cd dk = q >= p ? dk_[q - p] : std::conj(dk_[p - q]);
      return std::conj(gains_[e * cap_ + p]) * gains_[e * cap_ + q] * dk;
    };
    const auto gram = [&](std::size_t p, std::size_t q) {
      cd acc = 0.0;
      for (std::size_t e = 0; e < ne; ++e) acc += ear_gram(e, p, q);
      return acc;
    };
    const auto bsum = [&](std::size_t p) {
      cd acc = 0.0;
      for (std::size_t e = 0; e < ne; ++e) acc += b_ear_[e * cap_ + p];
      return acc;
    };

    // With a shared delay G_e = c_e G, so with z = C^-1 b and beta_e = C^-1 b_e
    // the residual of ear e is |y_e|^2 - 2 Re(z^H beta_e) + c_e |z|^2,
    // updated in O(L) per order.
    const bool fast = ne == 1 || d.shared_delay();
    double mag_total = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      share_[e] = std::norm(gains_[e * cap_]);
      mag_total += share_[e];
      cross_[e] = 0.0;
    }
    for (std::size_t e = 0; e < ne; ++e) share_[e] /= mag_total;
    double zz = 0.0;
    if (!fast) {
      for (std::size_t e = 0; e < ne; ++e)
        for (std::size_t p = 0; p < lmax; ++p)
          for (std::size_t q = 0; q < lmax; ++q) g_ear_[(e * cap_ + p) * cap_ + q] = ear_gram(e, p, q);
    }

    // G = C C^H, C lower triangular; row L-1 extends the factor of order L-1.
    for (std::size_t l = 0; l < lmax; ++l) {
      for (std::size_t j = 0; j < l; ++j) {
        cd acc = gram(l, j);
        for (std::size_t k = 0; k < j; ++k) acc -= chol_[l * cap_ + k] * std::conj(chol_[j * cap_ + k]);
        chol_[l * cap_ + j] = acc / chol_[j * cap_ + j];
      }
      const double g_ll = gram(l, l).real();
      double diag = g_ll;
      for (std::size_t k = 0; k < l; ++k) diag -= std::norm(chol_[l * cap_ + k]);
      if (!(diag > 1e-10 * g_ll)) break;  // harmonic is linearly dependent
      chol_[l * cap_ + l] = std::sqrt(diag);
      const double c_ll = chol_[l * cap_ + l].real();

      cd acc = bsum(l);
      for (std::size_t k = 0; k < l; ++k) acc -= chol_[l * cap_ + k] * z_[k];
      z_[l] = acc / c_ll;

      Step s{0.0, 0.0};
      if (fast) {
        zz += std::norm(z_[l]);
        for (std::size_t e = 0; e < ne; ++e) {
          cd be = b_ear_[e * cap_ + l];
          for (std::size_t k = 0; k < l; ++k) be -= chol_[l * cap_ + k] * beta_[e * cap_ + k];
          be /= c_ll;
          beta_[e * cap_ + l] = be;
          cross_[e] += (std::conj(z_[l]) * be).real();
          const double en = std::max(ear_energy_[e] - 2.0 * cross_[e] + share_[e] * zz, 0.0);
          s.residual_energy += en;
          s.sum_log_var += std::log(std::max(en / static_cast<double>(m), kVarianceFloor));
        }
        steps_.push_back(s);
        continue;
      }

      // back substitution C^H q = z for the current order
      const std::size_t order = l + 1;
      for (std::size_t i = order; i-- > 0;) {
        cd v = z_[i];
        for (std::size_t k = i + 1; k < order; ++k) v -= std::conj(chol_[k * cap_ + i]) * q_[k];
        q_[i] = v / chol_[i * cap_ + i];
      }

      for (std::size_t e = 0; e < ne; ++e) {
        // ||y_e - H_e q||^2 = ||y_e||^2 - 2 Re(q^H b_e) + q^H G_e q
        double cross = 0.0;
        double quad = 0.0;
        for (std::size_t p = 0; p < order; ++p) {
          cross += (std::conj(q_[p]) * b_ear_[e * cap_ + p]).real();
          cd row = 0.0;
          for (std::size_t q = 0; q < order; ++q) row += g_ear_[(e * cap_ + p) * cap_ + q] * q_[q];
          quad += (std::conj(q_[p]) * row).real();
        }
        const double en = std::max(ear_energy_[e] - 2.0 * cross + quad, 0.0);
        s.residual_energy += en;
        s.sum_log_var += std::log(std::max(en / static_cast<double>(m), kVarianceFloor));
      }
      steps_.push_back(s);
    }
    return steps_;
  }

 private:
  const Ears& ears_;
  std::size_t cap_;
  std::vector<double> ear_energy_;
  double total_energy_ = 0.0;
  ComplexVector gains_, b_ear_, g_ear_, chol_, z_, q_, dk_, beta_;
  std::vector<double> share_, cross_;
  std::vector<Step> steps_;
};

std::size_t max_order_for(double omega0, std::size_t cap) {
  // harmonics must stay below Nyquist: p * omega0 < pi
  std::size_t n = static_cast<std::size_t>(std::ceil(std::numbers::pi / omega0)) - 1;
  if (n == 0) n = 1;
  return cap == 0 ? n : std::min(n, cap);
}

}  // namespace

ComplexVector ml_amplitudes(std::span<const cd> left, std::span<const cd> right, double omega0,
                            std::size_t order, const DirectivityModel& directivity) {
  const Ears ears(left, right);
  check_omega(omega0);
  const std::size_t n = ears.m * ears.count();
  if (order == 0 || order > n) throw std::invalid_argument("ml_amplitudes: order must be in [1, stacked length]");
  Eigen::MatrixXcd h(n, order);
  Eigen::VectorXcd y(n);
  ComplexVector col(n);
  for (std::size_t p = 1; p <= order; ++p) {
    harmonic_column(ears, omega0, p, directivity, col.data());
    for (std::size_t i = 0; i < n; ++i) h(i, p - 1) = col[i];
  }
  for (std::size_t e = 0; e < ears.count(); ++e) {
    for (std::size_t i = 0; i < ears.m; ++i) y(e * ears.m + i) = ears.ch[e][i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(h);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(order)) {
    throw std::invalid_argument("ml_amplitudes: harmonic matrix is rank deficient");
  }
  const Eigen::VectorXcd q = qr.solve(y);
  return ComplexVector(q.data(), q.data() + q.size());
}

double degree_of_voicing(std::span<const cd> left, std::span<const cd> right, double omega0,
                         std::span<const cd> amplitudes, const DirectivityModel& directivity,
                         double max_voicing) {
  const Ears ears(left, right);
  check_omega(omega0);
  if (amplitudes.empty()) throw std::invalid_argument("degree_of_voicing: need at least one harmonic");
  const std::size_t n = ears.m * ears.count();
  ComplexVector recon(n), col(n);
  for (std::size_t p = 1; p <= amplitudes.size(); ++p) {
    harmonic_column(ears, omega0, p, directivity, col.data());
    simd::kernels().caxpy(amplitudes[p - 1], col.data(), recon.data(), n);
  }
  double total = 0.0;
  for (const auto& c : ears.ch) {
    for (const cd& v : c) total += std::norm(v);
  }
  if (total == 0.0) return 0.0;
  double harmonic = 0.0;
  for (const cd& v : recon) harmonic += std::norm(v);
  return std::clamp(harmonic / total, 0.0, max_voicing);
}

std::size_t map_order_select(std::span<const double> residual_variances, std::size_t n_obs,
                             std::span<const double> voicing, double threshold) {
  if (residual_variances.empty()) return 0;
  if (n_obs == 0) throw std::invalid_argument("map_order_select: n_obs must be positive");
  if (!voicing.empty() && voicing.size() != residual_variances.size()) {
    throw std::invalid_argument("map_order_select: voicing length mismatch");
  }
  const double n = static_cast<double>(n_obs);
  std::size_t best = 0;
  double best_j = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < residual_variances.size(); ++i) {
    const double j = n * std::log(std::max(residual_variances[i], kVarianceFloor)) +
                     3.0 * static_cast<double>(i + 1) * std::log(n);
    if (j < best_j) {
      best_j = j;
      best = i;
    }
  }
  if (!voicing.empty() && voicing[best] < threshold) return 0;
  return best + 1;
}

std::vector<double> pitch_grid(const PitchOptions& o) {
  if (!(o.sample_rate > 0.0) || !(o.step_hz > 0.0) || !(o.f_min_hz > 0.0) || o.f_max_hz < o.f_min_hz ||
      !(o.f_max_hz < o.sample_rate / 2.0)) {
    throw std::invalid_argument("pitch grid: need 0 < f_min <= f_max < fs/2 and step > 0");
  }
  std::vector<double> grid;
  const std::size_t count = static_cast<std::size_t>(std::floor((o.f_max_hz - o.f_min_hz) / o.step_hz + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double f = o.f_min_hz + static_cast<double>(i) * o.step_hz;
    grid.push_back(2.0 * std::numbers::pi * f / o.sample_rate);
  }
  return grid;
}

PitchResult estimate_pitch(std::span<const cd> left, std::span<const cd> right, const PitchOptions& options,
                           const DirectivityModel& directivity) {
  const Ears ears(left, right);
  const auto grid = pitch_grid(options);
  if (grid.empty()) throw std::invalid_argument("estimate_pitch: empty grid");

  std::size_t widest = 0;
  for (double w : grid) widest = std::max(widest, max_order_for(w, options.max_harmonics));
  OrderSweep sweep(ears, widest);

  PitchResult best;
  double best_j = std::numeric_limits<double>::infinity();
  double best_resid = 0.0;
  for (double w : grid) {
    const auto& steps = sweep.run(w, max_order_for(w, options.max_harmonics), directivity);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const double j = criterion(steps[i].sum_log_var, ears.m, ears.count(), i + 1);
      if (j < best_j) {
        best_j = j;
        best.info.omega0 = w;
        best.candidate_order = i + 1;
        best.cost = steps[i].sum_log_var;
        best_resid = steps[i].residual_energy;
      }
    }
  }
  if (best.candidate_order == 0) return best;

  const double total = sweep.total_energy();
  best.raw_voicing = total > 0.0 ? std::max(0.0, 1.0 - best_resid / total) : 0.0;
  best.info.voicing = std::min(best.raw_voicing, options.max_voicing);
  if (best.raw_voicing < options.voicing_threshold) {
    best.info.omega0 = 0.0;
    return best;
  }
  best.info.harmonic_order = best.candidate_order;
  best.info.period = static_cast<std::size_t>(std::lround(2.0 * std::numbers::pi / best.info.omega0));
  best.amplitudes = ml_amplitudes(left, right, best.info.omega0, best.info.harmonic_order, directivity);
  return best;
}

ComplexVector analytic_frame(std::span<const double> signal, std::size_t start, std::size_t len,
                             std::size_t context) {
  if (len == 0 || start + len > signal.size()) throw std::invalid_argument("analytic_frame: frame outside signal");
  const std::size_t lo = start >= context ? start - context : 0;
  const std::size_t hi = std::min(signal.size(), start + len + context);
  std::vector<double> seg(signal.begin() + static_cast<std::ptrdiff_t>(lo),
                          signal.begin() + static_cast<std::ptrdiff_t>(hi));
  if (seg.size() % 2 != 0) seg.push_back(0.0);
  const ComplexVector a = analytic_signal(seg);
  return ComplexVector(a.begin() + static_cast<std::ptrdiff_t>(start - lo),
                       a.begin() + static_cast<std::ptrdiff_t>(start - lo + len));
}

}  // namespace binaural
