#include "frozencil/hyperbolic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "frozencil/error.hpp"
#include "frozencil/mlp.hpp"
#include "frozencil/projections.hpp"

namespace frozencil {

namespace {

void check_curvature(double c) {
  if (!(c > 0.0)) throw Error(ErrorCode::kConfig, "curvature must be positive");
}

void check_same_curvature(const BallPoint& x, const BallPoint& y) {
  if (x.c != y.c) throw Error(ErrorCode::kConfig, "curvature mismatch between ball points");
  if (x.x.size() != y.x.size()) throw Error(ErrorCode::kDimension, "ball points differ in dimension");
}

double max_radius(double c) { return (1.0 - kBallClip) / std::sqrt(c); }

}  // namespace

BallPoint clip_to_ball(BallPoint p) {
  check_curvature(p.c);
  const double norm = p.x.norm();
  const double r = max_radius(p.c);
  if (norm > r) p.x *= r / norm;
  return p;
}

BallPoint mobius_neg(const BallPoint& x) { return BallPoint{-x.x, x.c}; }

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  check_same_curvature(x, y);
  const double c = x.c;
  const double xy = x.x.dot(y.x);
  const double x2 = x.x.squaredNorm();
  const double y2 = y.x.squaredNorm();
  const double num_x = 1.0 + 2.0 * c * xy + c * y2;
  const double num_y = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  return clip_to_ball(BallPoint{(num_x * x.x + num_y * y.x) / den, c});
}

BallPoint exp_map0(const Eigen::VectorXd& v, double c) {
  check_curvature(c);
  const double sc = std::sqrt(c);
  const double n = v.norm();
  if (n == 0.0) return BallPoint{Eigen::VectorXd::Zero(v.size()), c};
  return clip_to_ball(BallPoint{(std::tanh(sc * n) / (sc * n)) * v, c});
}

Eigen::VectorXd log_map0(const BallPoint& x) {
  check_curvature(x.c);
  const double sc = std::sqrt(x.c);
  const double n = x.x.norm();
  if (n == 0.0) return Eigen::VectorXd::Zero(x.x.size());
  const double arg = std::min(sc * n, kAtanhClamp);
  return (std::atanh(arg) / (sc * n)) * x.x;
}

double poincare_distance(const BallPoint& x, const BallPoint& y) {
  check_same_curvature(x, y);
  if (x.x == y.x) return 0.0;
  const double sc = std::sqrt(x.c);
  // Unclipped difference; clipping here would bias large distances.
  const double c = x.c;
  const Eigen::VectorXd nx = -x.x;
  const double xy = nx.dot(y.x);
  const double x2 = nx.squaredNorm();
  const double y2 = y.x.squaredNorm();
  const Eigen::VectorXd diff = ((1.0 + 2.0 * c * xy + c * y2) * nx + (1.0 - c * x2) * y.x) /
                               (1.0 + 2.0 * c * xy + c * c * x2 * y2);
  const double arg = std::min(sc * diff.norm(), kAtanhClamp);
  return (2.0 / sc) * std::atanh(arg);
}

HypProjParams init_hyp_projection(std::size_t input_dim, std::size_t ball_dim, std::uint64_t seed,
                                  double init_scale, double curvature, double temperature,
                                  bool normalize_input) {
  if (input_dim == 0 || ball_dim == 0) {
    throw Error(ErrorCode::kConfig, "hyperbolic projection dimensions must be positive");
  }
  check_curvature(curvature);
  if (!(temperature > 0.0)) throw Error(ErrorCode::kConfig, "temperature must be positive");
  if (!(init_scale > 0.0)) throw Error(ErrorCode::kConfig, "init scale must be positive");
  HypProjParams p;
  p.curvature = curvature;
  p.temperature = temperature;
  p.normalize_input = normalize_input;
  p.weights.resize(static_cast<Eigen::Index>(ball_dim), static_cast<Eigen::Index>(input_dim));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init_scale / std::sqrt(static_cast<double>(ball_dim)));
  for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.weights.cols(); ++c) p.weights(r, c) = normal(rng);
  }
  return p;
}

namespace {

Eigen::VectorXd prepare_input(const HypProjParams& params, const Eigen::VectorXd& z) {
  if (static_cast<std::size_t>(z.size()) != params.input_dim()) {
    throw Error(ErrorCode::kDimension, "hyperbolic projection expects dimension " +
                                           std::to_string(params.input_dim()) + ", got " +
                                           std::to_string(z.size()));
  }
  return params.normalize_input ? l2_normalize(z) : z;
}

}  // namespace

BallPoint hyp_project(const HypProjParams& params, const Eigen::VectorXd& z) {
  return exp_map0(params.weights * prepare_input(params, z), params.curvature);
}

BallPoint hyp_prototype(std::span<const BallPoint> points) {
  if (points.empty()) throw Error(ErrorCode::kArgument, "hyperbolic prototype of an empty set");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(points.front().x.size());
  for (const auto& p : points) {
    check_same_curvature(points.front(), p);
    acc += log_map0(p);
  }
  acc /= static_cast<double>(points.size());
  return exp_map0(acc, points.front().c);
}

namespace {

// Gradient of d_c(x, mu) with respect to x, from the equivalent form
// d = acosh(1 + 2c||x - mu||^2 / ((1 - c||x||^2)(1 - c||mu||^2))) / sqrt(c).
Eigen::VectorXd distance_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, double c) {
  const double alpha = 1.0 - c * x.squaredNorm();
  const double beta = 1.0 - c * mu.squaredNorm();
  const Eigen::VectorXd diff = x - mu;
  const double delta = diff.squaredNorm();
  const double q = 2.0 * c * delta / (alpha * beta);  // gamma - 1
  const double root = std::sqrt(q * (q + 2.0));
  if (root < 1e-300) return Eigen::VectorXd::Zero(x.size());
  const Eigen::VectorXd dgamma = (4.0 * c / (alpha * beta)) * (diff + (c * delta / alpha) * x);
  return dgamma / (std::sqrt(c) * root);
}

// Jacobian-transpose of the clipped exp map at the origin applied to g.
// The Jacobian is symmetric in both branches.
Eigen::VectorXd exp_map0_vjp(const Eigen::VectorXd& u, double c, const Eigen::VectorXd& g) {
  const double sc = std::sqrt(c);
  const double n = u.norm();
  if (n < 1e-12) return g;
  const double t = std::tanh(sc * n);
  if (t / sc > max_radius(c)) {
    // x = r_max u / n
    const Eigen::VectorXd unit = u / n;
    return (max_radius(c) / n) * (g - unit * unit.dot(g));
  }
  const double f = t / (sc * n);
  const double sech2 = 1.0 - t * t;
  const double fprime = (sc * n * sech2 - t) / (sc * n * n);
  return f * g + (fprime / n) * u * u.dot(g);
}

}  // namespace

HypLossAndGrad hyp_loss_and_grad(const HypProjParams& params, const Eigen::MatrixXd& inputs,
                                 std::span<const std::size_t> targets,
                                 std::span<const BallPoint> prototypes) {
  if (inputs.cols() == 0) throw Error(ErrorCode::kArgument, "empty batch");
  if (static_cast<std::size_t>(inputs.cols()) != targets.size()) {
    throw Error(ErrorCode::kArgument, "batch and target counts differ");
  }
  if (prototypes.empty()) throw Error(ErrorCode::kArgument, "no prototypes");
  const double c = params.curvature;
  const double tau = params.temperature;
  const auto k = prototypes.size();

  HypLossAndGrad out;
  out.grad = Eigen::MatrixXd::Zero(params.weights.rows(), params.weights.cols());
  Eigen::VectorXd logits(static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const std::size_t y = targets[static_cast<std::size_t>(j)];
    if (y >= k) throw Error(ErrorCode::kLabel, "target index out of range");
    const Eigen::VectorXd z = prepare_input(params, inputs.col(j));
    const Eigen::VectorXd u = params.weights * z;
    const BallPoint x = exp_map0(u, c);
    for (std::size_t i = 0; i < k; ++i) {
      logits(static_cast<Eigen::Index>(i)) = -poincare_distance(x, prototypes[i]) / tau;
    }
    const double mx = logits.maxCoeff();
    const Eigen::VectorXd e = (logits.array() - mx).exp().matrix();
    const double denom = e.sum();
    out.loss += -(logits(static_cast<Eigen::Index>(y)) - mx - std::log(denom));

    Eigen::VectorXd gx = Eigen::VectorXd::Zero(x.x.size());
    for (std::size_t i = 0; i < k; ++i) {
      const double coef = e(static_cast<Eigen::Index>(i)) / denom - (i == y ? 1.0 : 0.0);
      if (coef == 0.0) continue;
      gx += (-coef / tau) * distance_grad(x.x, prototypes[i].x, c);
    }
    out.grad += exp_map0_vjp(u, c, gx) * z.transpose();
  }
  const double b = static_cast<double>(inputs.cols());
  out.loss /= b;
  out.grad /= b;
  return out;
}

namespace {

struct Targets {
  std::vector<ClassId> classes;
  std::vector<std::size_t> index;  // per sample, into classes
};

Targets index_labels(const std::vector<ClassId>& labels) {
  Targets t;
  t.classes = labels;
  std::sort(t.classes.begin(), t.classes.end());
  t.classes.erase(std::unique(t.classes.begin(), t.classes.end()), t.classes.end());
  for (ClassId y : labels) {
    t.index.push_back(static_cast<std::size_t>(
        std::lower_bound(t.classes.begin(), t.classes.end(), y) - t.classes.begin()));
  }
  return t;
}

std::vector<BallPoint> class_prototypes(const HypProjParams& params, const Eigen::MatrixXd& x,
                                        const Targets& targets) {
  std::vector<std::vector<BallPoint>> members(targets.classes.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    members[targets.index[static_cast<std::size_t>(j)]].push_back(hyp_project(params, x.col(j)));
  }
  std::vector<BallPoint> protos;
  protos.reserve(members.size());
  for (const auto& m : members) protos.push_back(hyp_prototype(m));
  return protos;
}

}  // namespace

HypTrainResult train_hyp_projection(HypProjParams params, const DatasetView& train,
                                    const DatasetView& val, const HypTrainConfig& cfg) {
  if (train.empty()) throw Error(ErrorCode::kData, "hyperbolic projection training view is empty");
  if (cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid hyperbolic training configuration");
  }
  const Eigen::MatrixXd x_train = train.matrix();
  const Targets targets = index_labels(train.labels());

  // Validation samples whose class is absent from training are ignored.
  Eigen::MatrixXd x_val(x_train.rows(), 0);
  std::vector<std::size_t> y_val;
  if (!val.empty()) {
    const Eigen::MatrixXd all = val.matrix();
    const auto labels = val.labels();
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const auto it = std::lower_bound(targets.classes.begin(), targets.classes.end(), labels[j]);
      if (it != targets.classes.end() && *it == labels[j]) {
        keep.push_back(static_cast<Eigen::Index>(j));
        y_val.push_back(static_cast<std::size_t>(it - targets.classes.begin()));
      }
    }
    x_val.resize(all.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) x_val.col(static_cast<Eigen::Index>(j)) = all.col(keep[j]);
  }

  HypTrainResult result{std::move(params), {}};
  ParamSet weights{result.params.weights};
  AdamState adam = make_adam_state(weights, cfg.lr);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(targets.index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto protos = class_prototypes(result.params, x_train, targets);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Eigen::MatrixXd xb(x_train.rows(), static_cast<Eigen::Index>(end - start));
      std::vector<std::size_t> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.col(static_cast<Eigen::Index>(i - start)) = x_train.col(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = targets.index[order[i]];
      }
      const auto lg = hyp_loss_and_grad(result.params, xb, yb, protos);
      loss_sum += lg.loss * static_cast<double>(end - start);
      adam_step(weights, ParamSet{lg.grad}, adam);
      result.params.weights = weights[0];
    }
    result.history.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    if (!y_val.empty()) {
      result.history.val_loss.push_back(hyp_loss_and_grad(result.params, x_val, y_val, protos).loss);
    }
  }
  return result;
}

}  // namespace frozencil
