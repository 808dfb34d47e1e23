#include "frozencil/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "frozencil/error.hpp"
#include "hash.hpp"

namespace frozencil {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Adam

AdamState make_adam_state(const ParamSet& params, double lr) {
  AdamState state;
  state.lr = lr;
  for (const auto& p : params) {
    state.m.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    state.v.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
  return state;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::kDimension, "gradient count does not match parameter count");
  }
  if (state.m.empty() && state.v.empty()) {
    const auto fresh = make_adam_state(params, state.lr);
    state.m = fresh.m;
    state.v = fresh.v;
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::kDimension, "optimizer state does not match parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols() ||
        state.m[i].rows() != params[i].rows() || state.m[i].cols() != params[i].cols() ||
        state.v[i].rows() != params[i].rows() || state.v[i].cols() != params[i].cols()) {
      throw Error(ErrorCode::kDimension, "shape mismatch in parameter " + std::to_string(i));
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
    const auto m_hat = state.m[i].array() / bc1;
    const auto v_hat = state.v[i].array() / bc2;
    params[i].array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

// ---------------------------------------------------------------------------
// Head

MlpHead::MlpHead(ParamSet params, std::vector<ClassId> class_ids)
    : params_(std::move(params)), class_ids_(std::move(class_ids)) {
  if (class_ids_.empty()) throw Error(ErrorCode::kConfig, "MLP head needs at least one class");
  if (std::set<ClassId>(class_ids_.begin(), class_ids_.end()).size() != class_ids_.size()) {
    throw Error(ErrorCode::kConfig, "MLP head class ids must be unique");
  }
  if (params_.size() != 6) throw Error(ErrorCode::kDimension, "MLP head expects 6 tensors");
  const auto& w1 = params_[0];
  const auto& w2 = params_[2];
  const auto& w3 = params_[4];
  const bool ok = params_[1].rows() == w1.rows() && params_[1].cols() == 1 &&
                  w2.cols() == w1.rows() && params_[3].rows() == w2.rows() &&
                  params_[3].cols() == 1 && w3.cols() == w2.rows() &&
                  params_[5].rows() == w3.rows() && params_[5].cols() == 1 &&
                  static_cast<std::size_t>(w3.rows()) == class_ids_.size() && w1.cols() >= 1 &&
                  w1.rows() >= 1 && w2.rows() >= 1;
  if (!ok) throw Error(ErrorCode::kDimension, "inconsistent MLP head shapes");
}

std::uint64_t MlpHead::hash() const {
  detail::Fnv1a h;
  for (ClassId c : class_ids_) h.add(c);
  for (const auto& p : params_) h.add(p);
  return h.value();
}

MlpHead init_head(std::size_t input_dim, std::pair<std::size_t, std::size_t> hidden,
                  std::vector<ClassId> class_ids, std::uint64_t seed) {
  if (input_dim == 0 || hidden.first == 0 || hidden.second == 0) {
    throw Error(ErrorCode::kConfig, "MLP dimensions must be positive");
  }
  if (class_ids.empty()) throw Error(ErrorCode::kConfig, "MLP head needs at least one class");
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h1 = static_cast<Eigen::Index>(hidden.first);
  const auto h2 = static_cast<Eigen::Index>(hidden.second);
  const auto k = static_cast<Eigen::Index>(class_ids.size());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto kaiming = [&](Eigen::Index rows, Eigen::Index cols) {
    const double sd = std::sqrt(2.0 / static_cast<double>(cols));
    Eigen::MatrixXd w(rows, cols);
    // Row-major fill so the draw order is independent of Eigen storage order.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = sd * normal(rng);
    }
    return w;
  };
  ParamSet params;
  params.push_back(kaiming(h1, d));
  params.push_back(Eigen::MatrixXd::Zero(h1, 1));
  params.push_back(kaiming(h2, h1));
  params.push_back(Eigen::MatrixXd::Zero(h2, 1));
  params.push_back(kaiming(k, h2));
  params.push_back(Eigen::MatrixXd::Zero(k, 1));
  return MlpHead(std::move(params), std::move(class_ids));
}

namespace {

struct Activations {
  Eigen::MatrixXd pre1, act1, pre2, act2, logits, probs;
};

Activations forward(const MlpHead& head, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != head.input_dim()) {
    throw Error(ErrorCode::kDimension, "input has dimension " + std::to_string(x.rows()) +
                                           ", head expects " + std::to_string(head.input_dim()));
  }
  Activations a;
  a.pre1 = (head.w1() * x).colwise() + head.b1().col(0);
  a.act1 = a.pre1.cwiseMax(0.0);
  a.pre2 = (head.w2() * a.act1).colwise() + head.b2().col(0);
  a.act2 = a.pre2.cwiseMax(0.0);
  a.logits = (head.w3() * a.act2).colwise() + head.b3().col(0);
  // Max-subtracted softmax per column.
  Eigen::MatrixXd logits = a.logits;
  const Eigen::RowVectorXd col_max = logits.colwise().maxCoeff();
  logits.rowwise() -= col_max;
  a.probs = logits.array().exp().matrix();
  const Eigen::RowVectorXd sums = a.probs.colwise().sum();
  for (Eigen::Index j = 0; j < a.probs.cols(); ++j) a.probs.col(j) /= sums(j);
  return a;
}

}  // namespace

Eigen::MatrixXd head_forward_batch(const MlpHead& head, const Eigen::MatrixXd& inputs) {
  return forward(head, inputs).probs;
}

Eigen::VectorXd head_forward(const MlpHead& head, const Eigen::VectorXd& z) {
  return forward(head, z).probs.col(0);
}

Eigen::VectorXd head_log_probs(const MlpHead& head, const Eigen::VectorXd& z) {
  const Eigen::VectorXd logits = forward(head, z).logits.col(0);
  Eigen::Index top = 0;
  const double m = logits.maxCoeff(&top);
  // log(sum exp) = m + log1p(sum over the rest), exact even when p_top rounds to 1.
  double rest = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (i != top) rest += std::exp(logits(i) - m);
  }
  return (logits.array() - m - std::log1p(rest)).matrix();
}

LossAndGrad loss_and_grad(const MlpHead& head, const Eigen::MatrixXd& inputs,
                          std::span<const std::size_t> local_labels) {
  if (inputs.cols() == 0 || local_labels.empty()) {
    throw Error(ErrorCode::kArgument, "loss_and_grad needs a non-empty batch");
  }
  if (static_cast<std::size_t>(inputs.cols()) != local_labels.size()) {
    throw Error(ErrorCode::kArgument, "batch and label counts differ");
  }
  const auto k = head.num_classes();
  for (auto y : local_labels) {
    if (y >= k) throw Error(ErrorCode::kLabel, "local label " + std::to_string(y) + " >= " + std::to_string(k));
  }
  const Activations a = forward(head, inputs);
  const auto batch = static_cast<double>(inputs.cols());

  LossAndGrad out;
  // dL/dlogits = (p - onehot) / B
  Eigen::MatrixXd dlogits = a.probs;
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const auto y = static_cast<Eigen::Index>(local_labels[static_cast<std::size_t>(j)]);
    out.loss -= std::log(std::max(a.probs(y, j), std::numeric_limits<double>::min()));
    dlogits(y, j) -= 1.0;
  }
  out.loss /= batch;
  dlogits /= batch;

  const Eigen::MatrixXd g_w3 = dlogits * a.act2.transpose();
  const Eigen::MatrixXd g_b3 = dlogits.rowwise().sum();
  Eigen::MatrixXd d2 = head.w3().transpose() * dlogits;
  d2 = d2.cwiseProduct((a.pre2.array() > 0.0).cast<double>().matrix());
  const Eigen::MatrixXd g_w2 = d2 * a.act1.transpose();
  const Eigen::MatrixXd g_b2 = d2.rowwise().sum();
  Eigen::MatrixXd d1 = head.w2().transpose() * d2;
  d1 = d1.cwiseProduct((a.pre1.array() > 0.0).cast<double>().matrix());
  const Eigen::MatrixXd g_w1 = d1 * inputs.transpose();
  const Eigen::MatrixXd g_b1 = d1.rowwise().sum();

  out.grads = {g_w1, g_b1, g_w2, g_b2, g_w3, g_b3};
  return out;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::kConfig, "max_epochs must be >= 1");
  if (patience < 1) throw Error(ErrorCode::kConfig, "patience must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorCode::kConfig, "learning rate must be positive");
  if (hidden_dims.first < 1 || hidden_dims.second < 1) {
    throw Error(ErrorCode::kConfig, "hidden dims must be positive");
  }
}

namespace {

std::vector<std::size_t> to_local(const std::vector<ClassId>& labels,
                                  const std::vector<ClassId>& class_ids) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (ClassId y : labels) {
    const auto it = std::find(class_ids.begin(), class_ids.end(), y);
    if (it == class_ids.end()) {
      throw Error(ErrorCode::kLabel, "label " + std::to_string(y) + " is not covered by the head");
    }
    out.push_back(static_cast<std::size_t>(it - class_ids.begin()));
  }
  return out;
}

std::size_t argmax_lowest(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

double plain_accuracy(const MlpHead& head, const Eigen::MatrixXd& x,
                      const std::vector<std::size_t>& local) {
  const Eigen::MatrixXd probs = head_forward_batch(head, x);
  std::size_t correct = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    if (argmax_lowest(probs.col(j)) == local[static_cast<std::size_t>(j)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(local.size());
}

}  // namespace

TrainResult train_head(std::size_t input_dim, std::vector<ClassId> class_ids,
                       const DatasetView& train, const DatasetView& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw Error(ErrorCode::kData, "training view is empty");

  const Eigen::MatrixXd x_train = train.matrix();
  const auto y_train = to_local(train.labels(), class_ids);
  const Eigen::MatrixXd x_val = val.matrix();
  const auto y_val = to_local(val.labels(), class_ids);

  TrainResult result{init_head(input_dim, cfg.hidden_dims, std::move(class_ids), cfg.seed), {}};
  TrainHistory& hist = result.history;
  const bool use_val = !y_val.empty();
  if (!use_val) hist.warnings.emplace_back("empty validation view: early stopping disabled");

  MlpHead& head = result.head;
  MlpHead best = head;
  double best_acc = -1.0;
  std::size_t since_improvement = 0;
  AdamState adam = make_adam_state(head.params(), cfg.lr);

  std::mt19937_64 rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(y_train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Eigen::MatrixXd xb(x_train.rows(), static_cast<Eigen::Index>(end - start));
      std::vector<std::size_t> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.col(static_cast<Eigen::Index>(i - start)) = x_train.col(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = y_train[order[i]];
      }
      const auto lg = loss_and_grad(head, xb, yb);
      loss_sum += lg.loss * static_cast<double>(end - start);
      adam_step(head.mutable_params(), lg.grads, adam);
    }
    hist.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    hist.epochs_run = epoch;

    if (!use_val) {
      hist.val_accuracy.push_back(0.0);
      hist.best_val_accuracy.push_back(0.0);
      best = head;
      hist.best_epoch = epoch;
      continue;
    }
    const double acc = plain_accuracy(head, x_val, y_val);
    hist.val_accuracy.push_back(acc);
    if (acc > best_acc) {
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (acc >= best_acc) {
      best_acc = acc;
      best = head;
      hist.best_epoch = epoch;
    }
    hist.best_val_accuracy.push_back(best_acc);
    if (since_improvement >= cfg.patience) {
      hist.early_stopped = true;
      break;
    }
  }
  result.head = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Inference

void check_disjoint_heads(std::span<const MlpHead> heads) {
  std::set<ClassId> seen;
  for (const auto& h : heads) {
    for (ClassId c : h.class_ids()) {
      if (!seen.insert(c).second) {
        throw Error(ErrorCode::kConfig, "class " + std::to_string(c) + " is covered by two heads");
      }
    }
  }
}

GlobalPrediction predict_global(std::span<const MlpHead> heads, const Eigen::VectorXd& z) {
  if (heads.empty()) throw Error(ErrorCode::kState, "no trained heads");
  check_disjoint_heads(heads);
  std::size_t total = 0;
  for (const auto& h : heads) total += h.num_classes();

  GlobalPrediction out;
  out.scores.resize(static_cast<Eigen::Index>(total));
  double best = -std::numeric_limits<double>::infinity();
  Eigen::Index offset = 0;
  for (const auto& h : heads) {
    const Eigen::VectorXd lp = head_log_probs(h, z);
    const Eigen::VectorXd p = head_forward(h, z);
    out.scores.segment(offset, p.size()) = p;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const ClassId c = h.class_ids()[static_cast<std::size_t>(i)];
      if (lp(i) > best || (lp(i) == best && c < out.label)) {
        best = lp(i);
        out.label = c;
      }
    }
    offset += p.size();
  }
  return out;
}

}  // namespace frozencil
