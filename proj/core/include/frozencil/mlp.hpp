#pragma once

// Per-task MLP heads: Linear-ReLU-Linear-ReLU-Linear-Softmax, trained with Adam
// on cross-entropy, plus inference over the concatenation of several heads.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "frozencil/dataio.hpp"

namespace frozencil {

/// Ordered list of parameter tensors. Vectors are stored as n x 1 matrices.
using ParamSet = std::vector<Eigen::MatrixXd>;

/// Splitmix64 finaliser over (base, stream); used to derive independent seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step_count = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(const ParamSet& params, double lr = 0.001);

/// One bias-corrected Adam update, in place. Moments are allocated on the first
/// call if `state` is empty. Throws Error(kDimension) on shape mismatch.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

class MlpHead {
 public:
  MlpHead() = default;
  /// Takes (W1, b1, W2, b2, W3, b3). Throws Error(kDimension) if shapes disagree
  /// and Error(kConfig) if class_ids is empty or has duplicates.
  MlpHead(ParamSet params, std::vector<ClassId> class_ids);

  std::size_t input_dim() const { return static_cast<std::size_t>(params_[0].cols()); }
  std::size_t hidden1() const { return static_cast<std::size_t>(params_[0].rows()); }
  std::size_t hidden2() const { return static_cast<std::size_t>(params_[2].rows()); }
  std::size_t num_classes() const { return class_ids_.size(); }
  const std::vector<ClassId>& class_ids() const { return class_ids_; }

  const Eigen::MatrixXd& w1() const { return params_[0]; }
  const Eigen::MatrixXd& b1() const { return params_[1]; }
  const Eigen::MatrixXd& w2() const { return params_[2]; }
  const Eigen::MatrixXd& b2() const { return params_[3]; }
  const Eigen::MatrixXd& w3() const { return params_[4]; }
  const Eigen::MatrixXd& b3() const { return params_[5]; }

  const ParamSet& params() const { return params_; }
  ParamSet& mutable_params() { return params_; }

  /// FNV-1a over class ids and the raw parameter bytes.
  std::uint64_t hash() const;

 private:
  ParamSet params_;
  std::vector<ClassId> class_ids_;
};

/// Weights ~ N(0, 2 / fan_in), biases zero.
MlpHead init_head(std::size_t input_dim, std::pair<std::size_t, std::size_t> hidden,
                  std::vector<ClassId> class_ids, std::uint64_t seed);

/// Softmax probabilities, length k.
Eigen::VectorXd head_forward(const MlpHead& head, const Eigen::VectorXd& z);
/// Log-softmax computed without forming the probabilities, so saturated heads
/// still rank correctly.
Eigen::VectorXd head_log_probs(const MlpHead& head, const Eigen::VectorXd& z);
/// Column-wise probabilities for a d x B batch; result is k x B.
Eigen::MatrixXd head_forward_batch(const MlpHead& head, const Eigen::MatrixXd& inputs);

struct LossAndGrad {
  double loss = 0.0;
  ParamSet grads;
};

/// Mean cross-entropy over the batch (columns of `inputs`) and its exact
/// gradient. Labels are local indices into the head's class list.
LossAndGrad loss_and_grad(const MlpHead& head, const Eigen::MatrixXd& inputs,
                          std::span<const std::size_t> local_labels);

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 200;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::pair<std::size_t, std::size_t> hidden_dims{256, 128};
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  /// Best val accuracy seen up to and including each epoch.
  std::vector<double> best_val_accuracy;
  std::size_t epochs_run = 0;
  /// 1-based epoch whose weights were returned: the latest epoch reaching the
  /// best val accuracy. Patience counts strict improvements only.
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  std::vector<std::string> warnings;
};

struct TrainResult {
  MlpHead head;
  TrainHistory history;
};

/// Mini-batch Adam with per-epoch seeded shuffling and early stopping on
/// plain validation accuracy. An empty validation view disables early stopping.
TrainResult train_head(std::size_t input_dim, std::vector<ClassId> class_ids,
                       const DatasetView& train, const DatasetView& val, const TrainConfig& cfg);

struct GlobalPrediction {
  ClassId label = 0;
  /// Per-head softmax blocks in head order; each block sums to 1.
  Eigen::VectorXd scores;
};

/// Argmax over the concatenated head outputs, ranked by log-probability so
/// probabilities that round to 1.0 still order correctly. Exact ties go to the
/// lowest global class index. Throws Error(kConfig) if two heads share a class.
GlobalPrediction predict_global(std::span<const MlpHead> heads, const Eigen::VectorXd& z);

/// Throws Error(kConfig) if any class appears in more than one head.
void check_disjoint_heads(std::span<const MlpHead> heads);

}  // namespace frozencil
