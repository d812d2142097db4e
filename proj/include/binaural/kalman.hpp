#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "binaural/lpc.hpp"
#include "binaural/pitch.hpp"
#include "binaural/stp.hpp"

namespace binaural {

/// x(n) = F x(n-1) + G [d, v]^T,  z(n) = h^T x(n).
/// F is kept dense for inspection and as sparse rows for the recursion.
class StateSpaceModel {
 public:
  StateSpaceModel(Eigen::MatrixXd transition, Eigen::MatrixXd input_map,
                  Eigen::VectorXd observation, double speech_variance, double noise_variance,
                  std::size_t output_index);

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(f_.rows()); }
  const Eigen::MatrixXd& transition() const noexcept { return f_; }
  const Eigen::MatrixXd& input_map() const noexcept { return g_; }
  const Eigen::VectorXd& observation() const noexcept { return h_; }
  double speech_variance() const noexcept { return sigma_d2_; }
  double noise_variance() const noexcept { return sigma_v2_; }
  /// State entry holding the delayed speech sample that the smoother emits.
  std::size_t output_index() const noexcept { return output_index_; }
  /// Position and length of the excitation history block (V-UV only; length 0 otherwise).
  std::size_t excitation_offset() const noexcept { return excitation_offset_; }
  std::size_t excitation_size() const noexcept { return excitation_size_; }
  void set_excitation_block(std::size_t offset, std::size_t size);

  /// y = F x
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
  /// F M F^T + G diag(sigma_d^2, sigma_v^2) G^T for symmetric M.
  void propagate(const Eigen::MatrixXd& m, Eigen::MatrixXd& scratch, Eigen::MatrixXd& out) const;

 private:
  struct Entry {
    Eigen::Index col;
    double value;
  };
  struct Triplet {
    Eigen::Index row, col;
    double value;
  };

  Eigen::MatrixXd f_;
  Eigen::MatrixXd g_;
  Eigen::VectorXd h_;
  double sigma_d2_;
  double sigma_v2_;
  std::size_t output_index_;
  std::size_t excitation_offset_ = 0;
  std::size_t excitation_size_ = 0;
  std::vector<std::vector<Entry>> rows_;
  std::vector<Triplet> process_;
  struct Run {
    Eigen::Index dst, src, len;
  };
  std::vector<Eigen::Index> copy_rows_, mixed_rows_, copy_source_;
  std::vector<Run> copy_runs_;
};

/// State [s(n) .. s(n-d_s); w(n) .. w(n-Q+1)]. Requires d_s >= P.
/// A noise model of order 0 is treated as order 1 with a zero coefficient.
StateSpaceModel build_uv_model(const ArModel& speech, const ArModel& noise, std::size_t d_s);

/// State [s(n) .. s(n-d_s); u(n+1) .. u(n-p_max+2); w(n) .. w(n-Q+1)] with
/// u(n) = b u(n-p) + d(n). Unvoiced pitch gives b = 0. The speech model's
/// excitation variance is taken as sigma_d^2 as given.
StateSpaceModel build_vuv_model(const ArModel& speech, const ArModel& noise,
                                const PitchInfo& pitch, std::size_t d_s, std::size_t p_max);

struct SmootherState {
  Eigen::VectorXd x;  // a posteriori state
  Eigen::MatrixXd m;  // a posteriori error covariance
  Eigen::VectorXd gain;
  std::size_t steps = 0;

  SmootherState() = default;
  /// x = 0, M = initial_variance * I
  SmootherState(std::size_t dimension, double initial_variance);

  Eigen::MatrixXd scratch;
  Eigen::MatrixXd predicted;
  Eigen::VectorXd x_pred;
};

/// Innovation variance below this is treated as singular.
inline constexpr double kMinInnovationVariance = 1e-300;

/// One predict/correct step. Returns the smoothed sample d_s steps back
/// (state entry output_index) once enough samples have been seen.
/// Throws NumericalError when h^T M h <= kMinInnovationVariance.
std::optional<double> flks_step(SmootherState& state, const StateSpaceModel& model, double z);

enum class ExcitationModel { Unvoiced, VoicedUnvoiced };

struct SmootherConfig {
  std::size_t frame_len = 200;
  std::size_t smoother_delay = 25;  // d_s
  std::size_t max_period = 100;     // p_max
  ExcitationModel excitation = ExcitationModel::VoicedUnvoiced;
};

struct FrameParameters {
  StpEstimate stp;
  PitchInfo pitch;
};

/// Voiced frames drive the excitation recursion with
/// sigma_d^2 = (1 - b^2) * excitation variance, so the stationary variance of
/// u matches the STP estimate.
StateSpaceModel frame_model(const FrameParameters& params, const SmootherConfig& config);

/// Model for the last sample of a frame. The V-UV state already holds the
/// next sample's excitation, so its excitation row (pitch, voicing, variance)
/// comes from `next`; everything else from `current`. UV: frame_model(current).
StateSpaceModel boundary_model(const FrameParameters& current, const FrameParameters& next,
                               const SmootherConfig& config);

/// x = 0; M = r0 * I except the excitation block, which starts at the
/// first frame's excitation variance.
SmootherState initial_state(const StateSpaceModel& model, const FrameParameters& first,
                            double r0);

/// Per-sample smoothing with the model switched at frame boundaries (see
/// boundary_model for the last sample of each frame). Output
/// has the input's length and is aligned with it; the last d_s samples come
/// from flushing zero observations through the last frame's model. Samples
/// past the last full frame use the last frame's parameters. `initial_variance`
/// overrides r0, the first frame's mean square.
std::vector<double> enhance_channel(std::span<const double> z,
                                    std::span<const FrameParameters> params,
                                    const SmootherConfig& config = {},
                                    std::optional<double> initial_variance = std::nullopt);

}  // namespace binaural
