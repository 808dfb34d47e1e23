#include "frozencil/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "frozencil/binary_io.hpp"
#include "frozencil/error.hpp"

namespace frozencil {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view word) {
  if (word == "train") return Split::kTrain;
  if (word == "val") return Split::kVal;
  if (word == "test") return Split::kTest;
  throw Error(ErrorCode::kFormat, "unknown split '" + std::string(word) + "'");
}

DatasetFormat parse_dataset_format(std::string_view word) {
  if (word == "embd") return DatasetFormat::kEmbd;
  if (word == "csv") return DatasetFormat::kCsv;
  throw Error(ErrorCode::kConfig, "unknown dataset format '" + std::string(word) + "'");
}

EmbeddingDataset::EmbeddingDataset(std::size_t dim, std::vector<std::string> class_names,
                                   std::vector<EmbeddingRecord> records)
    : dim_(dim), class_names_(std::move(class_names)), records_(std::move(records)) {
  if (dim_ == 0) throw Error(ErrorCode::kDimension, "dataset dimension must be positive");
  std::unordered_set<std::string> seen;
  for (const auto& name : class_names_) {
    if (name.empty()) throw Error(ErrorCode::kData, "empty class name");
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kData, "duplicate class name '" + name + "'");
    }
  }
  for (const auto& r : records_) {
    if (static_cast<std::size_t>(r.embedding.size()) != dim_) {
      throw Error(ErrorCode::kDimension,
                  "record " + std::to_string(r.sample_id) + " has length " +
                      std::to_string(r.embedding.size()) + ", expected " + std::to_string(dim_));
    }
    if (r.label >= class_names_.size()) {
      throw Error(ErrorCode::kLabel, "record " + std::to_string(r.sample_id) + " has label " +
                                         std::to_string(r.label) + " >= " +
                                         std::to_string(class_names_.size()));
    }
  }
}

// ---------------------------------------------------------------------------
// EMBD

void write_embd(const EmbeddingDataset& dataset, std::ostream& out) {
  io::Writer w(out);
  w.magic("EMBD");
  w.u32(kEmbdVersion);
  w.u32(static_cast<std::uint32_t>(dataset.dim()));
  w.u32(static_cast<std::uint32_t>(dataset.num_classes()));
  w.u64(dataset.size());
  for (const auto& name : dataset.class_names()) w.short_string(name);
  for (const auto& r : dataset.records()) {
    w.u64(r.sample_id);
    w.u32(r.label);
    w.u8(static_cast<std::uint8_t>(r.split));
    for (Eigen::Index j = 0; j < r.embedding.size(); ++j) w.f32(r.embedding[j]);
  }
}

EmbeddingDataset read_embd(std::istream& in) {
  io::Reader r(in);
  r.expect_magic("EMBD");
  const auto version = r.u32();
  if (version != kEmbdVersion) {
    throw Error(ErrorCode::kFormat, "unsupported EMBD version " + std::to_string(version));
  }
  const auto dim = r.u32();
  const auto num_classes = r.u32();
  const auto n = r.u64();
  if (dim == 0) throw Error(ErrorCode::kFormat, "EMBD header declares dim 0");
  std::vector<std::string> names;
  names.reserve(num_classes);
  for (std::uint32_t c = 0; c < num_classes; ++c) names.push_back(r.short_string());

  std::vector<EmbeddingRecord> records;
  // Cap the reservation so a corrupt count cannot trigger a huge allocation.
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t i = 0; i < n; ++i) {
    EmbeddingRecord rec;
    rec.sample_id = r.u64();
    rec.label = r.u32();
    const auto split = r.u8();
    if (split > 2) throw Error(ErrorCode::kFormat, "invalid split code " + std::to_string(split));
    rec.split = static_cast<Split>(split);
    rec.embedding.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) rec.embedding[j] = r.f32();
    records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw Error(ErrorCode::kFormat, "trailing bytes after last EMBD record");
  return EmbeddingDataset(dim, std::move(names), std::move(records));
}

// ---------------------------------------------------------------------------
// CSV

std::filesystem::path csv_class_sidecar(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".classes";
  return p;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": cannot parse '" +
                                        std::string(field) + "'");
  }
  return value;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

void write_csv(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out << "sample_id,label,split";
  for (std::size_t j = 0; j < dataset.dim(); ++j) out << ",e" << j;
  out << '\n';
  char buf[64];
  for (const auto& r : dataset.records()) {
    out << r.sample_id << ',' << r.label << ',' << to_string(r.split);
    for (Eigen::Index j = 0; j < r.embedding.size(); ++j) {
      // 9 significant digits round-trip any float32 exactly.
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(r.embedding[j]));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");

  const auto sidecar = csv_class_sidecar(path);
  std::ofstream names(sidecar, std::ios::binary);
  if (!names) throw Error(ErrorCode::kIo, "cannot open '" + sidecar.string() + "' for writing");
  for (const auto& name : dataset.class_names()) names << name << '\n';
  if (!names) throw Error(ErrorCode::kIo, "write failed for '" + sidecar.string() + "'");
}

EmbeddingDataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");

  const auto sidecar = csv_class_sidecar(path);
  std::ifstream names_in(sidecar, std::ios::binary);
  if (!names_in) throw Error(ErrorCode::kIo, "missing class-name sidecar '" + sidecar.string() + "'");
  std::vector<std::string> names;
  for (std::string line; std::getline(names_in, line);) {
    const auto name = strip_cr(line);
    if (!name.empty()) names.emplace_back(name);
  }

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormat, "empty CSV file");
  const auto header = split_commas(strip_cr(line));
  if (header.size() < 4 || header[0] != "sample_id" || header[1] != "label" ||
      header[2] != "split") {
    throw Error(ErrorCode::kFormat, "CSV header must start with sample_id,label,split,e0");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[3 + j] != "e" + std::to_string(j)) {
      throw Error(ErrorCode::kFormat, "unexpected CSV column '" + std::string(header[3 + j]) + "'");
    }
  }

  std::vector<EmbeddingRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = strip_cr(line);
    if (row.empty()) continue;
    const auto fields = split_commas(row);
    if (fields.size() != dim + 3) {
      throw Error(ErrorCode::kDimension, "line " + std::to_string(line_no) + " has " +
                                             std::to_string(fields.size() - 3) +
                                             " embedding values, expected " + std::to_string(dim));
    }
    EmbeddingRecord rec;
    rec.sample_id = parse_number<std::uint64_t>(fields[0], line_no);
    rec.label = parse_number<std::uint32_t>(fields[1], line_no);
    rec.split = parse_split(fields[2]);
    rec.embedding.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
      rec.embedding[static_cast<Eigen::Index>(j)] = parse_number<float>(fields[3 + j], line_no);
    }
    records.push_back(std::move(rec));
  }
  return EmbeddingDataset(dim, std::move(names), std::move(records));
}

}  // namespace

EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (format == DatasetFormat::kCsv) return read_csv(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return read_embd(in);
}

void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format) {
  if (format == DatasetFormat::kCsv) {
    write_csv(dataset, path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  write_embd(dataset, out);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Synthetic data

std::array<std::size_t, 3> apportion_splits(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = fractions[s] * static_cast<double>(n);
    counts[s] = static_cast<std::size_t>(std::floor(exact));
    remainders[s] = exact - static_cast<double>(counts[s]);
    assigned += counts[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

EmbeddingDataset generate_synthetic(const SynthSpec& spec) {
  if (spec.n_classes == 0 || spec.dim == 0 || spec.samples_per_class == 0) {
    throw Error(ErrorCode::kConfig, "n_classes, dim and samples_per_class must be positive");
  }
  if (spec.n_classes > spec.dim) {
    throw Error(ErrorCode::kConfig, "n_classes (" + std::to_string(spec.n_classes) +
                                        ") exceeds dim (" + std::to_string(spec.dim) + ")");
  }
  if (!(spec.mean_scale > 0.0) || !(spec.noise_std >= 0.0)) {
    throw Error(ErrorCode::kConfig, "mean_scale must be > 0 and noise_std >= 0");
  }
  double total = 0.0;
  for (double f : spec.split_fractions) {
    if (f < 0.0) throw Error(ErrorCode::kConfig, "split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::kConfig, "split fractions must sum to 1");

  const auto counts = apportion_splits(spec.samples_per_class, spec.split_fractions);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::string> names;
  std::vector<EmbeddingRecord> records;
  records.reserve(spec.n_classes * spec.samples_per_class);
  std::uint64_t next_id = 0;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    names.push_back("class_" + std::to_string(c));
    std::size_t drawn = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < counts[s]; ++i, ++drawn) {
        EmbeddingRecord rec;
        rec.sample_id = next_id++;
        rec.label = static_cast<ClassId>(c);
        rec.split = static_cast<Split>(s);
        rec.embedding.resize(static_cast<Eigen::Index>(spec.dim));
        for (std::size_t j = 0; j < spec.dim; ++j) {
          const double center = (j == c) ? spec.mean_scale : 0.0;
          const double eps = spec.noise_std > 0.0 ? spec.noise_std * noise(rng) : 0.0;
          rec.embedding[static_cast<Eigen::Index>(j)] = static_cast<float>(center + eps);
        }
        records.push_back(std::move(rec));
      }
    }
  }
  return EmbeddingDataset(spec.dim, std::move(names), std::move(records));
}

// ---------------------------------------------------------------------------
// Schedules

TaskSchedule::TaskSchedule(std::vector<std::vector<ClassId>> tasks) : tasks_(std::move(tasks)) {
  std::set<ClassId> seen;
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (tasks_[t].empty()) {
      throw Error(ErrorCode::kConfig, "task " + std::to_string(t + 1) + " has no classes");
    }
    for (ClassId c : tasks_[t]) {
      if (!seen.insert(c).second) {
        throw Error(ErrorCode::kConfig, "class " + std::to_string(c) + " appears in more than one task");
      }
    }
  }
}

const std::vector<ClassId>& TaskSchedule::task(std::size_t t) const {
  if (t < 1 || t > tasks_.size()) {
    throw Error(ErrorCode::kIndex, "task index " + std::to_string(t) + " outside 1.." +
                                       std::to_string(tasks_.size()));
  }
  return tasks_[t - 1];
}

std::vector<ClassId> TaskSchedule::classes_through(std::size_t t) const {
  std::vector<ClassId> out;
  for (std::size_t i = 1; i <= t; ++i) {
    const auto& cls = task(i);
    out.insert(out.end(), cls.begin(), cls.end());
  }
  return out;
}

std::optional<std::size_t> TaskSchedule::task_of(ClassId c) const {
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (std::find(tasks_[t].begin(), tasks_[t].end(), c) != tasks_[t].end()) return t + 1;
  }
  return std::nullopt;
}

void TaskSchedule::validate_against(std::size_t num_classes) const {
  for (const auto& task : tasks_) {
    for (ClassId c : task) {
      if (c >= num_classes) {
        throw Error(ErrorCode::kConfig, "schedule references class " + std::to_string(c) +
                                            " but the dataset has " + std::to_string(num_classes));
      }
    }
  }
}

TaskSchedule make_task_schedule(std::size_t n_classes, std::size_t num_tasks, ClassOrder order,
                                std::uint64_t seed) {
  if (num_tasks == 0 || n_classes == 0) {
    throw Error(ErrorCode::kConfig, "number of classes and tasks must be positive");
  }
  if (num_tasks > n_classes) {
    throw Error(ErrorCode::kConfig, "cannot split " + std::to_string(n_classes) + " classes into " +
                                        std::to_string(num_tasks) + " tasks");
  }
  std::vector<ClassId> classes(n_classes);
  std::iota(classes.begin(), classes.end(), ClassId{0});
  if (order == ClassOrder::kShuffled) {
    std::mt19937_64 rng(seed);
    std::shuffle(classes.begin(), classes.end(), rng);
  }
  const std::size_t base = n_classes / num_tasks;
  const std::size_t extra = n_classes % num_tasks;
  std::vector<std::vector<ClassId>> tasks;
  std::size_t pos = 0;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    const std::size_t len = base + (t < extra ? 1 : 0);
    std::vector<ClassId> task(classes.begin() + static_cast<std::ptrdiff_t>(pos),
                              classes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(task.begin(), task.end());
    tasks.push_back(std::move(task));
    pos += len;
  }
  return TaskSchedule(std::move(tasks));
}

// ---------------------------------------------------------------------------
// Views

const EmbeddingRecord& DatasetView::operator[](std::size_t i) const {
  const auto& rec = dataset_->records()[indices_.at(i)];
  if (observer_) observer_->on_read(rec);
  return rec;
}

Eigen::MatrixXd DatasetView::matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = (*this)[i].embedding.cast<double>();
  }
  return m;
}

std::vector<ClassId> DatasetView::labels() const {
  std::vector<ClassId> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].label);
  return out;
}

std::vector<ClassId> DatasetView::classes() const {
  auto out = labels();
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DatasetView DatasetView::merge(const DatasetView& a, const DatasetView& b) {
  if (a.dataset_ == nullptr) return b;
  if (b.dataset_ == nullptr) return a;
  if (a.dataset_ != b.dataset_) {
    throw Error(ErrorCode::kArgument, "cannot merge views over different datasets");
  }
  auto idx = a.indices_;
  idx.insert(idx.end(), b.indices_.begin(), b.indices_.end());
  return DatasetView(*a.dataset_, std::move(idx), a.observer_);
}

DatasetView select_classes(const EmbeddingDataset& dataset, const std::vector<ClassId>& classes,
                           Split split, AccessObserver* observer) {
  std::vector<bool> wanted(dataset.num_classes(), false);
  for (ClassId c : classes) {
    if (c < wanted.size()) wanted[c] = true;
  }
  std::vector<std::size_t> idx;
  const auto& recs = dataset.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].split == split && wanted[recs[i].label]) idx.push_back(i);
  }
  return DatasetView(dataset, std::move(idx), observer);
}

DatasetView select_task(const EmbeddingDataset& dataset, const TaskSchedule& schedule,
                        std::size_t t, Split split, AccessObserver* observer) {
  return select_classes(dataset, schedule.task(t), split, observer);
}

}  // namespace frozencil
