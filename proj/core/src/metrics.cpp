#include "frozencil/metrics.hpp"

#include <algorithm>
#include <map>

#include "frozencil/error.hpp"

namespace frozencil {

namespace {

void check_inputs(std::span<const ClassId> preds, std::span<const ClassId> labels) {
  if (preds.size() != labels.size()) {
    throw Error(ErrorCode::kArgument, "prediction and label counts differ");
  }
  if (labels.empty()) throw Error(ErrorCode::kArgument, "accuracy of an empty set");
}

}  // namespace

double balanced_accuracy(std::span<const ClassId> preds, std::span<const ClassId> labels) {
  check_inputs(preds, labels);
  std::map<ClassId, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [correct, total] = per_class[labels[i]];
    ++total;
    if (preds[i] == labels[i]) ++correct;
  }
  double sum = 0.0;
  for (const auto& [c, ct] : per_class) {
    sum += static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  return sum / static_cast<double>(per_class.size());
}

double plain_accuracy(std::span<const ClassId> preds, std::span<const ClassId> labels) {
  check_inputs(preds, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (preds[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

AccuracyMatrix::AccuracyMatrix(std::size_t num_tasks)
    : num_tasks_(num_tasks), values_(num_tasks * num_tasks) {}

std::size_t AccuracyMatrix::index(std::size_t k, std::size_t i) const {
  if (k < 1 || k > num_tasks_ || i < 1 || i > num_tasks_) {
    throw Error(ErrorCode::kIndex, "accuracy matrix index (" + std::to_string(k) + ", " +
                                       std::to_string(i) + ") outside 1.." + std::to_string(num_tasks_));
  }
  return (k - 1) * num_tasks_ + (i - 1);
}

void AccuracyMatrix::set(std::size_t k, std::size_t i, double value) {
  if (i > k) throw Error(ErrorCode::kProtocol, "a_{k,i} is undefined for i > k");
  if (!(value >= 0.0 && value <= 1.0)) throw Error(ErrorCode::kArgument, "accuracy outside [0, 1]");
  values_[index(k, i)] = value;
}

std::optional<double> AccuracyMatrix::get(std::size_t k, std::size_t i) const {
  if (i > k) return std::nullopt;
  return values_[index(k, i)];
}

std::vector<std::vector<std::optional<double>>> AccuracyMatrix::rows() const {
  std::vector<std::vector<std::optional<double>>> out(num_tasks_);
  for (std::size_t k = 1; k <= num_tasks_; ++k) {
    for (std::size_t i = 1; i <= num_tasks_; ++i) out[k - 1].push_back(get(k, i));
  }
  return out;
}

std::optional<double> forgetting(const AccuracyMatrix& matrix) {
  const std::size_t t_final = matrix.num_tasks();
  if (t_final < 2) return std::nullopt;
  auto need = [&](std::size_t k, std::size_t i) {
    const auto v = matrix.get(k, i);
    if (!v) {
      throw Error(ErrorCode::kArgument, "forgetting needs a_{" + std::to_string(k) + "," +
                                            std::to_string(i) + "}");
    }
    return *v;
  };
  double total = 0.0;
  for (std::size_t i = 1; i < t_final; ++i) {
    double best = need(i, i);
    for (std::size_t k = i + 1; k < t_final; ++k) best = std::max(best, need(k, i));
    total += best - need(t_final, i);
  }
  return total / static_cast<double>(t_final - 1);
}

TaskEvaluation evaluate_task(const Predictor& predictor, const EmbeddingDataset& dataset,
                             const TaskSchedule& schedule, std::size_t i, std::size_t k,
                             AccuracyKind kind) {
  if (i > k) {
    throw Error(ErrorCode::kProtocol, "cannot evaluate task " + std::to_string(i) +
                                          " after training only through task " + std::to_string(k));
  }
  if (k > schedule.num_tasks()) throw Error(ErrorCode::kIndex, "trained-through index exceeds T");
  const DatasetView test = select_task(dataset, schedule, i, Split::kTest);
  if (test.empty()) {
    throw Error(ErrorCode::kData, "task " + std::to_string(i) + " has no test samples");
  }
  TaskEvaluation out;
  std::vector<ClassId> preds;
  std::vector<ClassId> labels;
  preds.reserve(test.size());
  labels.reserve(test.size());
  out.log.reserve(test.size());
  for (std::size_t j = 0; j < test.size(); ++j) {
    const auto& rec = test[j];
    const ClassId p = predictor(rec.z());
    preds.push_back(p);
    labels.push_back(rec.label);
    out.log.push_back(PredictionLog{k, i, rec.sample_id, rec.label, p});
  }
  out.value = kind == AccuracyKind::kBalanced ? balanced_accuracy(preds, labels)
                                              : plain_accuracy(preds, labels);
  return out;
}

}  // namespace frozencil
