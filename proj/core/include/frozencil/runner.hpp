#pragma once

// Class-incremental experiment orchestration. For each seed the task loop hands
// fitting code only the current task's train/val views, then fills row t of the
// accuracy matrix by evaluating every task seen so far.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frozencil/dataio.hpp"
#include "frozencil/hyperbolic.hpp"
#include "frozencil/metrics.hpp"
#include "frozencil/mlp.hpp"

namespace frozencil {

enum class NmcVariant { kBase, kNorm, kRp, kRpNorm, kHyp, kHypNorm, kPca, kPcaNorm, kLda };

struct MethodSpec {
  enum class Kind { kMlp, kNmc, kSingle, kJoint };
  Kind kind = Kind::kMlp;
  NmcVariant variant = NmcVariant::kBase;

  std::string to_string() const;
  bool is_reference() const { return kind == Kind::kSingle || kind == Kind::kJoint; }
};

/// Accepts "mlp", "single", "joint" and "nmc:<variant>" with variant one of
/// base, norm, rp, rp_norm, hyp, hyp_norm, pca, pca_norm, lda.
/// Throws Error(kConfig) for anything else.
MethodSpec parse_method(std::string_view text);

struct ScheduleConfig {
  std::size_t tasks = 2;
  ClassOrder order = ClassOrder::kContiguous;
  std::uint64_t order_seed = 0;
  /// Explicit class lists; when non-empty they override tasks/order.
  std::vector<std::vector<ClassId>> classes;
};

struct VariantConfig {
  std::size_t rp_dim = 4096;
  bool rp_relu = true;
  /// 0 selects min(d, 256).
  std::size_t pca_k = 0;
  /// nullopt selects 1e-4 * trace(S_W) / d.
  std::optional<double> lda_ridge;
  std::size_t hyp_dim = 128;
  double hyp_curvature = 1.0;
  double hyp_temperature = 0.1;
  double hyp_init_scale = 0.1;
  std::size_t hyp_epochs = 50;
  double hyp_lr = 0.001;
  std::size_t hyp_batch_size = 200;
};

struct ExperimentConfig {
  std::string dataset_path;
  DatasetFormat dataset_format = DatasetFormat::kEmbd;
  /// Report label; defaults to the dataset file stem.
  std::string dataset_name;
  ScheduleConfig schedule;
  std::string method = "mlp";
  TrainConfig train;
  VariantConfig variant;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  AccuracyKind accuracy_metric = AccuracyKind::kBalanced;
};

/// Strict JSON parsing: unknown keys and wrong types raise Error(kConfig).
ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, no whitespace).
std::string config_to_json(const ExperimentConfig& config);
/// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

TaskSchedule build_schedule(const ScheduleConfig& config, std::size_t num_classes);

struct TaskRecord {
  std::size_t task = 0;
  std::vector<ClassId> classes;
  std::size_t train_samples = 0;
  std::optional<TrainHistory> mlp_history;
  std::optional<HypTrainHistory> hyp_history;
  /// Fingerprints of state from tasks < t, taken before and after fitting task t.
  std::uint64_t past_hash_before = 0;
  std::uint64_t past_hash_after = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  /// BAAC over the union test set of all scheduled classes after the last task.
  double baac = 0.0;
  std::optional<double> forgetting;
  AccuracyMatrix accuracy_matrix;
  bool frozen_past_ok = true;
  std::vector<TaskRecord> tasks;
};

struct SummaryStat {
  double mean = 0.0;
  /// Sample standard deviation; nullopt with fewer than two seeds.
  std::optional<double> std;
};

SummaryStat summarize(std::span<const double> values);

struct ResultsBundle {
  std::string method;
  std::string dataset;
  ExperimentConfig config;
  std::string config_hash;
  /// Ascending by seed.
  std::vector<SeedResult> runs;
  SummaryStat baac;
  /// nullopt when any run has no forgetting value (T < 2, SINGLE, JOINT).
  std::optional<SummaryStat> forgetting;
};

/// Observation points for tests and tooling. When hooks are installed, seeds
/// run sequentially on the calling thread.
class RunHooks : public AccessObserver {
 public:
  void on_read(const EmbeddingRecord&) override {}
  virtual void on_fit_begin(std::uint64_t /*seed*/, std::size_t /*task*/) {}
  virtual void on_fit_end(std::uint64_t /*seed*/, std::size_t /*task*/) {}
  virtual void on_predictions(std::uint64_t /*seed*/, std::span<const PredictionLog> /*log*/) {}
};

struct RunOptions {
  RunHooks* hooks = nullptr;
  /// Writes head / bank / projection checkpoints per seed when set.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// 0 reads FROZENCIL_THREADS, falling back to the hardware concurrency.
  std::size_t threads = 0;
};

/// Runs mlp, nmc:* and the single/joint references. Throws Error(kConfig) for an
/// unknown method and Error(kData) for a task without training data.
ResultsBundle run_experiment(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                             const RunOptions& options = {});
/// Loads `config.dataset_path` and runs.
ResultsBundle run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// SINGLE: one head per task with task-oracle routing at inference.
/// JOINT: one head over the pooled data of all tasks. Forgetting is absent for both.
ResultsBundle run_reference(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                            const RunOptions& options = {});

/// Worker count from FROZENCIL_THREADS (>= 1), or the hardware concurrency.
std::size_t configured_threads();

}  // namespace frozencil
