#include "binaural/kalman.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "binaural/errors.hpp"

namespace binaural {

namespace {

using Eigen::Index;

ArModel at_least_order_one(const ArModel& model) {
  if (model.order() > 0) return model;
  ArModel padded = model;
  padded.coefficients = {0.0};
  return padded;
}

// Companion block: first row holds the coefficients, ones on the sub-diagonal.
void place_companion(Eigen::MatrixXd& f, Index offset, Index size,
                     std::span<const double> top_row) {
  for (std::size_t i = 0; i < top_row.size(); ++i) f(offset, offset + static_cast<Index>(i)) = top_row[i];
  for (Index i = 1; i < size; ++i) f(offset + i, offset + i - 1) = 1.0;
}

}  // namespace

StateSpaceModel::StateSpaceModel(Eigen::MatrixXd transition, Eigen::MatrixXd input_map,
                                 Eigen::VectorXd observation, double speech_variance,
                                 double noise_variance, std::size_t output_index)
    : f_(std::move(transition)),
      g_(std::move(input_map)),
      h_(std::move(observation)),
      sigma_d2_(speech_variance),
      sigma_v2_(noise_variance),
      output_index_(output_index) {
  const Index n = f_.rows();
  if (n == 0 || f_.cols() != n || g_.rows() != n || g_.cols() != 2 || h_.size() != n)
    throw std::invalid_argument("StateSpaceModel: inconsistent dimensions");
  if (!(speech_variance >= 0.0) || !(noise_variance >= 0.0))
    throw std::invalid_argument("StateSpaceModel: variances must be non-negative");
  if (output_index >= static_cast<std::size_t>(n))
    throw std::invalid_argument("StateSpaceModel: output index out of range");

  rows_.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (f_(i, j) != 0.0) rows_[static_cast<std::size_t>(i)].push_back({j, f_(i, j)});

  for (Index i = 0; i < n; ++i) {
    const auto& row = rows_[static_cast<std::size_t>(i)];
    if (row.size() == 1 && row[0].value == 1.0) {
      copy_rows_.push_back(i);
      copy_source_.push_back(row[0].col);
    } else {
      mixed_rows_.push_back(i);
      copy_source_.push_back(-1);
    }
  }
  for (const Index i : copy_rows_) {
    const Index src = copy_source_[static_cast<std::size_t>(i)];
    if (!copy_runs_.empty() && copy_runs_.back().dst + copy_runs_.back().len == i &&
        copy_runs_.back().src + copy_runs_.back().len == src)
      ++copy_runs_.back().len;
    else
      copy_runs_.push_back({i, src, 1});
  }

  const Eigen::MatrixXd q =
      g_ * Eigen::Vector2d(sigma_d2_, sigma_v2_).asDiagonal() * g_.transpose();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (q(i, j) != 0.0) process_.push_back({i, j, q(i, j)});
}

void StateSpaceModel::set_excitation_block(std::size_t offset, std::size_t size) {
  if (offset + size > dimension())
    throw std::invalid_argument("StateSpaceModel: excitation block out of range");
  excitation_offset_ = offset;
  excitation_size_ = size;
}

void StateSpaceModel::apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
  y.resize(x.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    double acc = 0.0;
    for (const auto& e : rows_[i]) acc += e.value * x(e.col);
    y(static_cast<Index>(i)) = acc;
  }
}

void StateSpaceModel::propagate(const Eigen::MatrixXd& m, Eigen::MatrixXd& scratch,
                                Eigen::MatrixXd& out) const {
  const Index n = f_.rows();
  out.resize(n, n);
  // Copy rows i, j: (F M F^T)[i,j] = M[src_i, src_j], moved as contiguous runs.
  for (const Index j : copy_rows_) {
    const double* src = m.col(copy_source_[static_cast<std::size_t>(j)]).data();
    double* dst = out.col(j).data();
    for (const auto& r : copy_runs_) std::copy_n(src + r.src, r.len, dst + r.dst);
  }
  // Other rows i: v = M f_i, then row and column i of the result are F v.
  scratch.resize(n, 1);
  for (const Index i : mixed_rows_) {
    auto v = scratch.col(0);
    v.setZero();
    for (const auto& e : rows_[static_cast<std::size_t>(i)]) v.noalias() += e.value * m.col(e.col);
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      double acc = 0.0;
      for (const auto& e : rows_[k]) acc += e.value * v(e.col);
      out(static_cast<Index>(k), i) = acc;
    }
  }
  // Mixed-mixed entries were written twice; keep the lower one so the result is symmetric.
  for (const Index i : mixed_rows_) {
    for (const Index k : mixed_rows_)
      if (k < i) out(k, i) = out(i, k);
    for (const Index j : copy_rows_) out(i, j) = out(j, i);
  }
  for (const auto& t : process_) out(t.row, t.col) += t.value;
}

StateSpaceModel build_uv_model(const ArModel& speech, const ArModel& noise_in, std::size_t d_s) {
  const std::size_t p = speech.order();
  if (d_s < p)
    throw std::invalid_argument("build_uv_model: smoother delay " + std::to_string(d_s) +
                                " is below the speech order " + std::to_string(p));
  const ArModel noise = at_least_order_one(noise_in);
  const Index ns = static_cast<Index>(d_s + 1);
  const Index nq = static_cast<Index>(noise.order());
  const Index n = ns + nq;

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
  place_companion(f, 0, ns, speech.coefficients);
  place_companion(f, ns, nq, noise.coefficients);

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 2);
  g(0, 0) = 1.0;
  g(ns, 1) = 1.0;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  h(0) = 1.0;
  h(ns) = 1.0;
  return {std::move(f), std::move(g), std::move(h), speech.excitation_variance,
          noise.excitation_variance, d_s};
}

StateSpaceModel build_vuv_model(const ArModel& speech, const ArModel& noise_in,
                                const PitchInfo& pitch, std::size_t d_s, std::size_t p_max) {
  const std::size_t p = speech.order();
  if (d_s < p)
    throw std::invalid_argument("build_vuv_model: smoother delay " + std::to_string(d_s) +
                                " is below the speech order " + std::to_string(p));
  if (p_max == 0) throw std::invalid_argument("build_vuv_model: p_max must be positive");
  const bool voiced = pitch.voiced();
  if (voiced && (pitch.period == 0 || pitch.period > p_max))
    throw std::invalid_argument("build_vuv_model: pitch period " + std::to_string(pitch.period) +
                                " outside [1, " + std::to_string(p_max) + "]");
  if (voiced && !(pitch.voicing >= 0.0 && pitch.voicing < 1.0))
    throw std::invalid_argument("build_vuv_model: degree of voicing must lie in [0, 1)");

  const ArModel noise = at_least_order_one(noise_in);
  const Index ns = static_cast<Index>(d_s + 1);
  const Index nu = static_cast<Index>(p_max);
  const Index nq = static_cast<Index>(noise.order());
  const Index n = ns + nu + nq;

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
  place_companion(f, 0, ns, speech.coefficients);
  f(0, ns) = 1.0;  // s(n) picks up u(n)
  std::vector<double> b_row;
  if (voiced) {
    b_row.assign(pitch.period, 0.0);
    b_row.back() = pitch.voicing;
  }
  place_companion(f, ns, nu, b_row);
  place_companion(f, ns + nu, nq, noise.coefficients);

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 2);
  g(ns, 0) = 1.0;
  g(ns + nu, 1) = 1.0;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  h(0) = 1.0;
  h(ns + nu) = 1.0;
  StateSpaceModel model(std::move(f), std::move(g), std::move(h), speech.excitation_variance,
                        noise.excitation_variance, d_s);
  model.set_excitation_block(static_cast<std::size_t>(ns), p_max);
  return model;
}

SmootherState::SmootherState(std::size_t dimension, double initial_variance)
    : x(Eigen::VectorXd::Zero(static_cast<Index>(dimension))),
      m(Eigen::MatrixXd::Identity(static_cast<Index>(dimension), static_cast<Index>(dimension)) *
        initial_variance),
      gain(Eigen::VectorXd::Zero(static_cast<Index>(dimension))) {}

std::optional<double> flks_step(SmootherState& state, const StateSpaceModel& model, double z) {
  const Index n = static_cast<Index>(model.dimension());
  if (state.x.size() != n || state.m.rows() != n || state.m.cols() != n)
    throw std::invalid_argument("flks_step: state and model dimensions differ");

  model.apply(state.x, state.x_pred);
  model.propagate(state.m, state.scratch, state.predicted);

  const auto& h = model.observation();
  // M h and h^T M h, with h a sparse 0/1 selector in practice.
  Eigen::VectorXd mh = Eigen::VectorXd::Zero(n);
  double z_pred = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (h(i) == 0.0) continue;
    mh.noalias() += h(i) * state.predicted.col(i);
    z_pred += h(i) * state.x_pred(i);
  }
  double innovation_var = 0.0;
  for (Index i = 0; i < n; ++i)
    if (h(i) != 0.0) innovation_var += h(i) * mh(i);
  if (!(innovation_var > kMinInnovationVariance))
    throw NumericalError("flks_step: innovation variance " + std::to_string(innovation_var) +
                         " is not positive");

  state.gain = mh / innovation_var;
  state.x = state.x_pred + state.gain * (z - z_pred);
  // (I - K h^T) M = M - (M h)(M h)^T / (h^T M h); the product order keeps it symmetric.
  const double inv = 1.0 / innovation_var;
  state.m.swap(state.predicted);
  for (Index j = 0; j < n; ++j) state.m.col(j).noalias() -= (mh * mh(j)) * inv;
  ++state.steps;
  if (state.steps <= model.output_index()) return std::nullopt;
  return state.x(static_cast<Index>(model.output_index()));
}

StateSpaceModel frame_model(const FrameParameters& params, const SmootherConfig& config) {
  if (config.excitation == ExcitationModel::Unvoiced)
    return build_uv_model(params.stp.speech, params.stp.noise, config.smoother_delay);
  ArModel speech = params.stp.speech;
  if (params.pitch.voiced()) {
    const double b = params.pitch.voicing;
    speech.excitation_variance *= 1.0 - b * b;
  }
  return build_vuv_model(speech, params.stp.noise, params.pitch, config.smoother_delay,
                         config.max_period);
}

StateSpaceModel boundary_model(const FrameParameters& current, const FrameParameters& next,
                               const SmootherConfig& config) {
  if (config.excitation == ExcitationModel::Unvoiced) return frame_model(current, config);
  FrameParameters mix = current;
  mix.stp.speech.excitation_variance = next.stp.speech.excitation_variance;
  mix.pitch = next.pitch;
  return frame_model(mix, config);
}

SmootherState initial_state(const StateSpaceModel& model, const FrameParameters& first,
                            double r0) {
  SmootherState state(model.dimension(), r0);
  const auto off = static_cast<Index>(model.excitation_offset());
  const auto len = static_cast<Index>(model.excitation_size());
  state.m.diagonal().segment(off, len).setConstant(first.stp.speech.excitation_variance);
  return state;
}

std::vector<double> enhance_channel(std::span<const double> z,
                                    std::span<const FrameParameters> params,
                                    const SmootherConfig& config,
                                    std::optional<double> initial_variance) {
  if (config.frame_len == 0) throw std::invalid_argument("enhance_channel: frame_len is zero");
  if (z.empty()) return {};
  const std::size_t m = config.frame_len;
  const std::size_t full = z.size() / m;
  const std::size_t all = (z.size() + m - 1) / m;
  if (params.size() != all && params.size() != std::max<std::size_t>(full, 1))
    throw std::invalid_argument("enhance_channel: " + std::to_string(params.size()) +
                                " parameter sets for " + std::to_string(all) + " frames");

  const std::size_t first_len = std::min(m, z.size());
  double r0 = 0.0;
  for (std::size_t i = 0; i < first_len; ++i) r0 += z[i] * z[i];
  r0 /= static_cast<double>(first_len);
  if (initial_variance) r0 = *initial_variance;

  std::optional<StateSpaceModel> model;
  std::size_t model_frame = 0;
  bool model_boundary = false;
  std::vector<double> out(z.size(), 0.0);
  SmootherState state;
  const std::size_t delay = config.smoother_delay;

  auto emit = [&](std::size_t n, std::optional<double> v) {
    if (v && n >= delay && n - delay < out.size()) out[n - delay] = *v;
  };

  for (std::size_t n = 0; n < z.size(); ++n) {
    const std::size_t frame = std::min(n / m, params.size() - 1);
    const std::size_t next = std::min((n + 1) / m, params.size() - 1);
    const bool boundary = next != frame && n + 1 < z.size();
    if (!model || frame != model_frame || boundary != model_boundary) {
      model.emplace(boundary ? boundary_model(params[frame], params[next], config)
                             : frame_model(params[frame], config));
      model_frame = frame;
      model_boundary = boundary;
      if (n == 0) state = initial_state(*model, params[0], r0);
    }
    try {
      emit(n, flks_step(state, *model, z[n]));
    } catch (const NumericalError& e) {
      throw NumericalError("kalman: frame " + std::to_string(frame) + ", sample " + std::to_string(n) +
                           ": " + e.what());
    }
  }
  try {
    for (std::size_t n = z.size(); n < z.size() + delay; ++n) emit(n, flks_step(state, *model, 0.0));
  } catch (const NumericalError& e) {
    throw NumericalError("kalman: flush after frame " + std::to_string(model_frame) + ": " + e.what());
  }
  return out;
}

}  // namespace binaural
