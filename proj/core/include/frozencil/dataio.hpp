#pragma once

// Embedding datasets, task schedules and the synthetic Gaussian-cluster source.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace frozencil {

using ClassId = std::uint32_t;

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

std::string_view to_string(Split split);
/// Parses "train" / "val" / "test"; throws Error(kFormat) otherwise.
Split parse_split(std::string_view word);

struct EmbeddingRecord {
  std::uint64_t sample_id = 0;
  /// Stored in float32, the precision of the on-disk formats.
  Eigen::VectorXf embedding;
  ClassId label = 0;
  Split split = Split::kTrain;

  Eigen::VectorXd z() const { return embedding.cast<double>(); }

  friend bool operator==(const EmbeddingRecord& a, const EmbeddingRecord& b) {
    return a.sample_id == b.sample_id && a.label == b.label && a.split == b.split &&
           a.embedding.size() == b.embedding.size() && a.embedding == b.embedding;
  }
};

/// Immutable after construction; the constructor validates every invariant.
class EmbeddingDataset {
 public:
  EmbeddingDataset() = default;
  /// Throws Error(kDimension) for a record of the wrong length, Error(kLabel)
  /// for an out-of-range label, Error(kData) for bad class names.
  EmbeddingDataset(std::size_t dim, std::vector<std::string> class_names,
                   std::vector<EmbeddingRecord> records);

  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<EmbeddingRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> class_names_;
  std::vector<EmbeddingRecord> records_;
};

enum class DatasetFormat { kEmbd, kCsv };

DatasetFormat parse_dataset_format(std::string_view word);

/// Sidecar holding class names for the CSV format: `<csv path>.classes`.
std::filesystem::path csv_class_sidecar(const std::filesystem::path& csv_path);

EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format);

// Stream-level EMBD codec, used by the file functions and by tests.
void write_embd(const EmbeddingDataset& dataset, std::ostream& out);
EmbeddingDataset read_embd(std::istream& in);

inline constexpr std::uint32_t kEmbdVersion = 1;

struct SynthSpec {
  std::size_t n_classes = 4;
  std::size_t dim = 8;
  std::size_t samples_per_class = 200;
  double mean_scale = 10.0;
  double noise_std = 0.5;
  std::array<double, 3> split_fractions{0.7, 0.15, 0.15};
  std::uint64_t seed = 0;
};

/// Class c is centred at mean_scale * e_c with isotropic Gaussian noise.
EmbeddingDataset generate_synthetic(const SynthSpec& spec);

/// Largest-remainder apportionment of `n` items over the three splits; ties go
/// to the earlier split.
std::array<std::size_t, 3> apportion_splits(std::size_t n, const std::array<double, 3>& fractions);

class TaskSchedule {
 public:
  TaskSchedule() = default;
  /// Throws Error(kConfig) if a task is empty or two tasks share a class.
  explicit TaskSchedule(std::vector<std::vector<ClassId>> tasks);

  std::size_t num_tasks() const { return tasks_.size(); }
  /// 1-based task index, matching the usual t = 1..T notation.
  const std::vector<ClassId>& task(std::size_t t) const;
  const std::vector<std::vector<ClassId>>& tasks() const { return tasks_; }
  /// Classes of tasks 1..t in schedule order.
  std::vector<ClassId> classes_through(std::size_t t) const;
  std::vector<ClassId> all_classes() const { return classes_through(num_tasks()); }
  /// 1-based task owning `c`, or nullopt when the class is not scheduled.
  std::optional<std::size_t> task_of(ClassId c) const;
  /// Throws Error(kConfig) if any class index is >= num_classes.
  void validate_against(std::size_t num_classes) const;

  friend bool operator==(const TaskSchedule&, const TaskSchedule&) = default;

 private:
  std::vector<std::vector<ClassId>> tasks_;
};

enum class ClassOrder { kContiguous, kShuffled };

TaskSchedule make_task_schedule(std::size_t n_classes, std::size_t num_tasks, ClassOrder order,
                                std::uint64_t seed = 0);

/// Receives a callback for every record read through a DatasetView.
class AccessObserver {
 public:
  virtual ~AccessObserver() = default;
  virtual void on_read(const EmbeddingRecord& record) = 0;
};

/// Non-owning filtered view over a dataset. The dataset must outlive the view.
class DatasetView {
 public:
  DatasetView() = default;
  DatasetView(const EmbeddingDataset& dataset, std::vector<std::size_t> indices,
              AccessObserver* observer = nullptr)
      : dataset_(&dataset), indices_(std::move(indices)), observer_(observer) {}

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::size_t dim() const { return dataset_ ? dataset_->dim() : 0; }
  const EmbeddingRecord& operator[](std::size_t i) const;
  const std::vector<std::size_t>& indices() const { return indices_; }
  const EmbeddingDataset* dataset() const { return dataset_; }

  /// Embeddings as columns of a dim x size matrix.
  Eigen::MatrixXd matrix() const;
  std::vector<ClassId> labels() const;
  /// Distinct labels present, ascending.
  std::vector<ClassId> classes() const;

  DatasetView with_observer(AccessObserver* observer) const {
    return DatasetView(*dataset_, indices_, observer);
  }
  /// Concatenation of two views over the same dataset.
  static DatasetView merge(const DatasetView& a, const DatasetView& b);

 private:
  const EmbeddingDataset* dataset_ = nullptr;
  std::vector<std::size_t> indices_;
  AccessObserver* observer_ = nullptr;
};

/// Records with label in C_t and the requested split. `t` is 1-based.
DatasetView select_task(const EmbeddingDataset& dataset, const TaskSchedule& schedule,
                        std::size_t t, Split split, AccessObserver* observer = nullptr);

/// Records of the given split whose label is in `classes`.
DatasetView select_classes(const EmbeddingDataset& dataset, const std::vector<ClassId>& classes,
                           Split split, AccessObserver* observer = nullptr);

}  // namespace frozencil
