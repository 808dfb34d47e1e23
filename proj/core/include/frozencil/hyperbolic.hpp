#pragma once

// Poincare-ball geometry with curvature -c and a learnable linear projection
// into the ball (linear map followed by the exponential map at the origin).
//
// Every map that produces a ball point clips it to sqrt(c) * ||x|| <= 1 - kBallClip.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "frozencil/dataio.hpp"

namespace frozencil {

inline constexpr double kBallClip = 1e-5;
inline constexpr double kAtanhClamp = 1.0 - 1e-7;

struct BallPoint {
  Eigen::VectorXd x;
  double c = 1.0;
};

/// Radially rescales `x` onto the clip radius if it lies outside it.
BallPoint clip_to_ball(BallPoint p);

/// Moebius addition x (+)_c y. Throws Error(kConfig) on curvature mismatch.
BallPoint mobius_add(const BallPoint& x, const BallPoint& y);
BallPoint mobius_neg(const BallPoint& x);

/// exp_0^c(v) = tanh(sqrt(c)||v||) v / (sqrt(c)||v||), with exp_0(0) = 0.
BallPoint exp_map0(const Eigen::VectorXd& v, double c);
/// Inverse of exp_map0: atanh(sqrt(c)||x||) x / (sqrt(c)||x||).
Eigen::VectorXd log_map0(const BallPoint& x);

/// d_c(x, y) = (2 / sqrt(c)) atanh(sqrt(c) ||(-x) (+)_c y||).
double poincare_distance(const BallPoint& x, const BallPoint& y);

struct HypProjParams {
  /// p x d.
  Eigen::MatrixXd weights;
  double curvature = 1.0;
  double temperature = 0.1;
  /// l2-normalise inputs before the linear map.
  bool normalize_input = false;

  std::size_t ball_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(weights.cols()); }
};

/// Entries ~ N(0, init_scale^2 / p), so ||A z|| is about init_scale * ||z||.
HypProjParams init_hyp_projection(std::size_t input_dim, std::size_t ball_dim,
                                  std::uint64_t seed, double init_scale = 0.1,
                                  double curvature = 1.0, double temperature = 0.1,
                                  bool normalize_input = false);

/// exp_map0(A z', c) where z' is z or its l2 normalisation.
BallPoint hyp_project(const HypProjParams& params, const Eigen::VectorXd& z);

/// Tangent-space mean exp_0((1/n) sum log_0(x_i)). Throws Error(kArgument) when empty.
BallPoint hyp_prototype(std::span<const BallPoint> points);

struct HypLossAndGrad {
  double loss = 0.0;
  /// Same shape as HypProjParams::weights.
  Eigen::MatrixXd grad;
};

/// Mean prototypical cross-entropy with logits -d_c(proj(z), mu_c) / tau.
/// Prototypes are held fixed; the gradient is with respect to the projection
/// weights only. Inputs are columns of `inputs`; `targets` index into `prototypes`.
HypLossAndGrad hyp_loss_and_grad(const HypProjParams& params, const Eigen::MatrixXd& inputs,
                                 std::span<const std::size_t> targets,
                                 std::span<const BallPoint> prototypes);

struct HypTrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 200;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
};

struct HypTrainHistory {
  /// Mean training loss per epoch.
  std::vector<double> train_loss;
  /// Mean validation loss per epoch (empty when no validation data).
  std::vector<double> val_loss;
};

struct HypTrainResult {
  HypProjParams params;
  HypTrainHistory history;
};

/// Each epoch recomputes class prototypes from the current projection, then
/// takes Adam steps over shuffled mini-batches with those prototypes fixed.
HypTrainResult train_hyp_projection(HypProjParams params, const DatasetView& train,
                                    const DatasetView& val, const HypTrainConfig& cfg);

}  // namespace frozencil
