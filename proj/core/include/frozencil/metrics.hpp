#pragma once

// Balanced accuracy, the task-wise accuracy matrix a_{k,i}, and forgetting.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "frozencil/dataio.hpp"

namespace frozencil {

/// Mean per-class recall over the classes that occur in `labels`.
/// Throws Error(kArgument) on empty input or a length mismatch.
double balanced_accuracy(std::span<const ClassId> preds, std::span<const ClassId> labels);

/// Fraction of exact matches. Same error contract as balanced_accuracy.
double plain_accuracy(std::span<const ClassId> preds, std::span<const ClassId> labels);

enum class AccuracyKind { kBalanced, kPlain };

/// Lower-triangular matrix of a_{k,i}, 1 <= i <= k <= T, 1-based accessors.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t num_tasks);

  std::size_t num_tasks() const { return num_tasks_; }
  /// Throws Error(kProtocol) for i > k, Error(kIndex) outside 1..T, and
  /// Error(kArgument) for values outside [0, 1].
  void set(std::size_t k, std::size_t i, double value);
  std::optional<double> get(std::size_t k, std::size_t i) const;
  /// Row-major T x T nested vector with nullopt above the diagonal or where unset.
  std::vector<std::vector<std::optional<double>>> rows() const;

 private:
  std::size_t index(std::size_t k, std::size_t i) const;
  std::size_t num_tasks_ = 0;
  std::vector<std::optional<double>> values_;
};

/// F = 1/(T-1) sum_{i<T} [ max_{i<=k<T} a_{k,i} - a_{T,i} ], signed.
/// Returns nullopt for T < 2. Throws Error(kArgument) if a required entry is unset.
std::optional<double> forgetting(const AccuracyMatrix& matrix);

/// Non-negative display variant of the forgetting measure.
inline std::optional<double> clamp_forgetting(std::optional<double> f) {
  if (f && *f < 0.0) return 0.0;
  return f;
}

/// Per-sample record of one evaluation.
struct PredictionLog {
  std::size_t trained_through = 0;  // k
  std::size_t task = 0;             // i
  std::uint64_t sample_id = 0;
  ClassId label = 0;
  ClassId prediction = 0;
};

using Predictor = std::function<ClassId(const Eigen::VectorXd&)>;

struct TaskEvaluation {
  double value = 0.0;
  std::vector<PredictionLog> log;
};

/// a_{k,i}: accuracy of `predictor` (trained through task k, predicting over
/// C_{<=k}) on task i's test split. Throws Error(kProtocol) for i > k and
/// Error(kData) when task i has no test samples.
TaskEvaluation evaluate_task(const Predictor& predictor, const EmbeddingDataset& dataset,
                             const TaskSchedule& schedule, std::size_t i, std::size_t k,
                             AccuracyKind kind = AccuracyKind::kBalanced);

}  // namespace frozencil
