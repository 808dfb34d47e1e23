#include "frozencil/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "frozencil/checkpoint.hpp"
#include "frozencil/error.hpp"
#include "frozencil/prototypes.hpp"
#include "frozencil/transform.hpp"
#include "hash.hpp"

namespace frozencil {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Method names

namespace {

struct VariantName {
  std::string_view name;
  NmcVariant variant;
};

constexpr VariantName kVariants[] = {
    {"base", NmcVariant::kBase}, {"norm", NmcVariant::kNorm},       {"rp", NmcVariant::kRp},
    {"rp_norm", NmcVariant::kRpNorm}, {"hyp", NmcVariant::kHyp},    {"hyp_norm", NmcVariant::kHypNorm},
    {"pca", NmcVariant::kPca},   {"pca_norm", NmcVariant::kPcaNorm}, {"lda", NmcVariant::kLda},
};

}  // namespace

std::string MethodSpec::to_string() const {
  switch (kind) {
    case Kind::kMlp: return "mlp";
    case Kind::kSingle: return "single";
    case Kind::kJoint: return "joint";
    case Kind::kNmc: break;
  }
  for (const auto& v : kVariants) {
    if (v.variant == variant) return "nmc:" + std::string(v.name);
  }
  return "nmc:?";
}

MethodSpec parse_method(std::string_view text) {
  MethodSpec spec;
  if (text == "mlp") return spec;
  if (text == "single") {
    spec.kind = MethodSpec::Kind::kSingle;
    return spec;
  }
  if (text == "joint") {
    spec.kind = MethodSpec::Kind::kJoint;
    return spec;
  }
  constexpr std::string_view prefix = "nmc:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto name = text.substr(prefix.size());
    for (const auto& v : kVariants) {
      if (v.name == name) {
        spec.kind = MethodSpec::Kind::kNmc;
        spec.variant = v.variant;
        return spec;
      }
    }
  }
  throw Error(ErrorCode::kConfig, "unknown method '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Config JSON

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw Error(ErrorCode::kConfig, std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::kConfig, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string order_name(ClassOrder order) {
  return order == ClassOrder::kShuffled ? "shuffled" : "contiguous";
}

json to_json_obj(const ExperimentConfig& c) {
  json j;
  j["dataset_path"] = c.dataset_path;
  j["dataset_format"] = c.dataset_format == DatasetFormat::kCsv ? "csv" : "embd";
  j["dataset_name"] = c.dataset_name;
  j["method"] = c.method;
  j["seeds"] = c.seeds;
  j["accuracy_metric"] = c.accuracy_metric == AccuracyKind::kPlain ? "plain" : "balanced";
  j["schedule"] = {{"tasks", c.schedule.tasks},
                   {"order", order_name(c.schedule.order)},
                   {"order_seed", c.schedule.order_seed},
                   {"classes", c.schedule.classes}};
  j["train"] = {{"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"hidden_dims", {c.train.hidden_dims.first, c.train.hidden_dims.second}}};
  const auto& v = c.variant;
  j["variant"] = {{"rp_dim", v.rp_dim},
                  {"rp_relu", v.rp_relu},
                  {"pca_k", v.pca_k},
                  {"lda_ridge", v.lda_ridge ? json(*v.lda_ridge) : json(nullptr)},
                  {"hyp_dim", v.hyp_dim},
                  {"hyp_curvature", v.hyp_curvature},
                  {"hyp_temperature", v.hyp_temperature},
                  {"hyp_init_scale", v.hyp_init_scale},
                  {"hyp_epochs", v.hyp_epochs},
                  {"hyp_lr", v.hyp_lr},
                  {"hyp_batch_size", v.hyp_batch_size}};
  return j;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"dataset_path", "dataset_format", "dataset_name", "schedule", "method", "train",
                 "variant", "seeds", "accuracy_metric"},
             "config");
  ExperimentConfig c;
  read_opt(j, "dataset_path", c.dataset_path);
  std::string fmt = "embd";
  read_opt(j, "dataset_format", fmt);
  c.dataset_format = parse_dataset_format(fmt);
  read_opt(j, "dataset_name", c.dataset_name);
  read_opt(j, "method", c.method);
  read_opt(j, "seeds", c.seeds);
  std::string metric = "balanced";
  read_opt(j, "accuracy_metric", metric);
  if (metric == "balanced") {
    c.accuracy_metric = AccuracyKind::kBalanced;
  } else if (metric == "plain") {
    c.accuracy_metric = AccuracyKind::kPlain;
  } else {
    throw Error(ErrorCode::kConfig, "accuracy_metric must be 'balanced' or 'plain'");
  }

  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    check_keys(s, {"tasks", "order", "order_seed", "classes"}, "schedule");
    read_opt(s, "tasks", c.schedule.tasks);
    std::string order = "contiguous";
    read_opt(s, "order", order);
    if (order == "contiguous") {
      c.schedule.order = ClassOrder::kContiguous;
    } else if (order == "shuffled") {
      c.schedule.order = ClassOrder::kShuffled;
    } else {
      throw Error(ErrorCode::kConfig, "schedule.order must be 'contiguous' or 'shuffled'");
    }
    read_opt(s, "order_seed", c.schedule.order_seed);
    read_opt(s, "classes", c.schedule.classes);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, {"lr", "batch_size", "max_epochs", "patience", "hidden_dims"}, "train");
    read_opt(t, "lr", c.train.lr);
    read_opt(t, "batch_size", c.train.batch_size);
    read_opt(t, "max_epochs", c.train.max_epochs);
    read_opt(t, "patience", c.train.patience);
    if (t.contains("hidden_dims")) {
      std::vector<std::size_t> dims;
      read_opt(t, "hidden_dims", dims);
      if (dims.size() != 2) throw Error(ErrorCode::kConfig, "train.hidden_dims needs two entries");
      c.train.hidden_dims = {dims[0], dims[1]};
    }
  }
  if (j.contains("variant")) {
    const auto& v = j.at("variant");
    check_keys(v, {"rp_dim", "rp_relu", "pca_k", "lda_ridge", "hyp_dim", "hyp_curvature",
                   "hyp_temperature", "hyp_init_scale", "hyp_epochs", "hyp_lr", "hyp_batch_size"},
               "variant");
    auto& vc = c.variant;
    read_opt(v, "rp_dim", vc.rp_dim);
    read_opt(v, "rp_relu", vc.rp_relu);
    read_opt(v, "pca_k", vc.pca_k);
    if (v.contains("lda_ridge") && !v.at("lda_ridge").is_null()) {
      double ridge = 0.0;
      read_opt(v, "lda_ridge", ridge);
      vc.lda_ridge = ridge;
    }
    read_opt(v, "hyp_dim", vc.hyp_dim);
    read_opt(v, "hyp_curvature", vc.hyp_curvature);
    read_opt(v, "hyp_temperature", vc.hyp_temperature);
    read_opt(v, "hyp_init_scale", vc.hyp_init_scale);
    read_opt(v, "hyp_epochs", vc.hyp_epochs);
    read_opt(v, "hyp_lr", vc.hyp_lr);
    read_opt(v, "hyp_batch_size", vc.hyp_batch_size);
  }
  parse_method(c.method);
  c.train.validate();
  if (c.seeds.empty()) throw Error(ErrorCode::kConfig, "seeds must not be empty");
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& config) { return to_json_obj(config).dump(); }

std::string config_hash(const ExperimentConfig& config) {
  detail::Fnv1a h;
  const auto text = config_to_json(config);
  h.bytes(text.data(), text.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.value()));
  return buf;
}

TaskSchedule build_schedule(const ScheduleConfig& config, std::size_t num_classes) {
  TaskSchedule schedule = config.classes.empty()
                              ? make_task_schedule(num_classes, config.tasks, config.order, config.order_seed)
                              : TaskSchedule(config.classes);
  schedule.validate_against(num_classes);
  if (schedule.num_tasks() == 0) throw Error(ErrorCode::kConfig, "schedule has no tasks");
  return schedule;
}

SummaryStat summarize(std::span<const double> values) {
  SummaryStat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::size_t configured_threads() {
  if (const char* env = std::getenv("FROZENCIL_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// ---------------------------------------------------------------------------
// Learners

namespace {

class Learner {
 public:
  virtual ~Learner() = default;
  virtual void fit_task(std::size_t t, const std::vector<ClassId>& classes, const DatasetView& train,
                        const DatasetView& val, TaskRecord& record) = 0;
  virtual ClassId predict(const Eigen::VectorXd& z) const = 0;
  /// Fingerprint of all state owned by tasks < t.
  virtual std::uint64_t past_hash(std::size_t t, const TaskSchedule& schedule) const = 0;
  virtual void write_checkpoints(const std::filesystem::path& dir, const std::string& prefix) const = 0;
};

class MlpLearner final : public Learner {
 public:
  MlpLearner(std::size_t dim, TrainConfig cfg, std::uint64_t seed) : dim_(dim), cfg_(cfg), seed_(seed) {}

  void fit_task(std::size_t t, const std::vector<ClassId>& classes, const DatasetView& train,
                const DatasetView& val, TaskRecord& record) override {
    TrainConfig cfg = cfg_;
    cfg.seed = derive_seed(seed_, t);
    auto result = train_head(dim_, classes, train, val, cfg);
    record.mlp_history = std::move(result.history);
    heads_.push_back(std::move(result.head));
  }

  ClassId predict(const Eigen::VectorXd& z) const override { return predict_global(heads_, z).label; }

  std::uint64_t past_hash(std::size_t t, const TaskSchedule&) const override {
    detail::Fnv1a h;
    for (std::size_t i = 0; i + 1 < t && i < heads_.size(); ++i) h.add(heads_[i].hash());
    return h.value();
  }

  void write_checkpoints(const std::filesystem::path& dir, const std::string& prefix) const override {
    for (std::size_t i = 0; i < heads_.size(); ++i) {
      write_file(dir / (prefix + "_head" + std::to_string(i + 1) + ".mlph"),
                 [&](std::ostream& out) { write_head(heads_[i], out); });
    }
  }

  const std::vector<MlpHead>& heads() const { return heads_; }

 private:
  std::size_t dim_;
  TrainConfig cfg_;
  std::uint64_t seed_;
  std::vector<MlpHead> heads_;
};

bool normalized(NmcVariant v) {
  return v == NmcVariant::kNorm || v == NmcVariant::kRpNorm || v == NmcVariant::kHypNorm ||
         v == NmcVariant::kPcaNorm;
}

class NmcLearner final : public Learner {
 public:
  NmcLearner(NmcVariant variant, const VariantConfig& vc, std::size_t dim, std::uint64_t seed)
      : variant_(variant), vc_(vc), dim_(dim), seed_(seed) {}

  void fit_task(std::size_t t, const std::vector<ClassId>&, const DatasetView& train,
                const DatasetView& val, TaskRecord& record) override {
    if (!transform_) init_transform(train, val, record);

    if (variant_ == NmcVariant::kPca || variant_ == NmcVariant::kPcaNorm || variant_ == NmcVariant::kLda) {
      refit_affine(train);
      bank_.reproject(*transform_);
      bank_.add(fit_prototypes(train, *transform_));
    } else {
      const auto entries = fit_prototypes(train, *transform_);
      bank_ = add_task(bank_, entries, transform_->space());
    }
    (void)t;
  }

  ClassId predict(const Eigen::VectorXd& z) const override { return nmc_predict(bank_, *transform_, z); }

  std::uint64_t past_hash(std::size_t t, const TaskSchedule& schedule) const override {
    detail::Fnv1a h;
    if (t <= 1) return h.value();
    const auto past = schedule.classes_through(t - 1);
    h.add(bank_.hash(past));
    // Frozen nonlinear transforms belong to task 1.
    if (transform_) {
      if (const auto* rp = std::get_if<RandomProj>(&transform_->projection())) h.add(rp->weights);
      if (const auto* hp = std::get_if<HypProjParams>(&transform_->projection())) h.add(hp->weights);
    }
    return h.value();
  }

  void write_checkpoints(const std::filesystem::path& dir, const std::string& prefix) const override {
    write_file(dir / (prefix + "_bank.pbnk"), [&](std::ostream& out) { write_bank(bank_, out); });
    if (!transform_) return;
    const auto& p = transform_->projection();
    if (const auto* rp = std::get_if<RandomProj>(&p)) {
      write_file(dir / (prefix + "_transform.rprj"), [&](std::ostream& out) { write_random_projection(*rp, out); });
    } else if (const auto* pca = std::get_if<PcaModel>(&p)) {
      write_file(dir / (prefix + "_transform.pcam"), [&](std::ostream& out) { write_pca(*pca, out); });
    } else if (const auto* lda = std::get_if<LdaModel>(&p)) {
      write_file(dir / (prefix + "_transform.ldam"), [&](std::ostream& out) { write_lda(*lda, out); });
    } else if (const auto* hp = std::get_if<HypProjParams>(&p)) {
      write_file(dir / (prefix + "_transform.hypp"), [&](std::ostream& out) { write_hyp_params(*hp, out); });
    }
  }

 private:
  void init_transform(const DatasetView& train, const DatasetView& val, TaskRecord& record) {
    const bool norm = normalized(variant_);
    switch (variant_) {
      case NmcVariant::kBase:
      case NmcVariant::kNorm:
        transform_ = FeatureTransform::identity(norm);
        break;
      case NmcVariant::kRp:
      case NmcVariant::kRpNorm:
        transform_ = FeatureTransform::random_projection(
            init_random_projection(dim_, vc_.rp_dim, derive_seed(seed_, 100), vc_.rp_relu), norm);
        break;
      case NmcVariant::kHyp:
      case NmcVariant::kHypNorm: {
        auto params = init_hyp_projection(dim_, vc_.hyp_dim, derive_seed(seed_, 200), vc_.hyp_init_scale,
                                          vc_.hyp_curvature, vc_.hyp_temperature, norm);
        HypTrainConfig cfg;
        cfg.lr = vc_.hyp_lr;
        cfg.batch_size = vc_.hyp_batch_size;
        cfg.epochs = vc_.hyp_epochs;
        cfg.seed = derive_seed(seed_, 201);
        auto trained = train_hyp_projection(std::move(params), train, val, cfg);
        record.hyp_history = std::move(trained.history);
        transform_ = FeatureTransform::hyperbolic(std::move(trained.params));
        break;
      }
      case NmcVariant::kPca:
      case NmcVariant::kPcaNorm:
      case NmcVariant::kLda:
        // Fitted in refit_affine once statistics exist.
        stats_ = make_stream_stats(dim_);
        bank_ = PrototypeBank(SpaceId{variant_ == NmcVariant::kLda ? SpaceKind::kLda : SpaceKind::kPca, norm});
        return;
    }
    bank_ = PrototypeBank(transform_->space());
  }

  void refit_affine(const DatasetView& train) {
    const bool norm = normalized(variant_);
    Eigen::MatrixXd x = train.matrix();
    if (norm) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) = l2_normalize(x.col(j));
    }
    const auto labels = train.labels();
    update_stats(stats_, x, labels);
    if (variant_ == NmcVariant::kLda) {
      transform_ = FeatureTransform::lda(lda_fit(stats_, vc_.lda_ridge), norm);
    } else {
      const std::size_t k = vc_.pca_k == 0 ? std::min<std::size_t>(dim_, 256) : vc_.pca_k;
      transform_ = FeatureTransform::pca(pca_fit(stats_, k), norm);
    }
  }

  NmcVariant variant_;
  VariantConfig vc_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::optional<FeatureTransform> transform_;
  PrototypeBank bank_{SpaceId{}};
  StreamStats stats_;
};

std::unique_ptr<Learner> make_learner(const MethodSpec& spec, const ExperimentConfig& config,
                                      std::size_t dim, std::uint64_t seed) {
  if (spec.kind == MethodSpec::Kind::kMlp) return std::make_unique<MlpLearner>(dim, config.train, seed);
  return std::make_unique<NmcLearner>(spec.variant, config.variant, dim, seed);
}

void check_task_data(std::size_t t, const std::vector<ClassId>& classes, const DatasetView& train) {
  if (train.empty()) throw Error(ErrorCode::kData, "task " + std::to_string(t) + " has no training data");
  const auto present_list = train.classes();
  const std::set<ClassId> present(present_list.begin(), present_list.end());
  for (ClassId c : classes) {
    if (!present.count(c)) {
      throw Error(ErrorCode::kData, "class " + std::to_string(c) + " of task " + std::to_string(t) +
                                        " has no training samples");
    }
  }
}

double union_baac(const EmbeddingDataset& dataset, const TaskSchedule& schedule,
                  const std::function<ClassId(const EmbeddingRecord&)>& predict) {
  const DatasetView test = select_classes(dataset, schedule.all_classes(), Split::kTest);
  if (test.empty()) throw Error(ErrorCode::kData, "no test samples for the scheduled classes");
  std::vector<ClassId> preds, labels;
  for (std::size_t i = 0; i < test.size(); ++i) {
    preds.push_back(predict(test[i]));
    labels.push_back(test[i].label);
  }
  return balanced_accuracy(preds, labels);
}

std::string seed_prefix(std::uint64_t seed) { return "seed" + std::to_string(seed); }

SeedResult run_cil_seed(const ExperimentConfig& config, const MethodSpec& spec,
                        const EmbeddingDataset& dataset, const TaskSchedule& schedule,
                        std::uint64_t seed, const RunOptions& options) {
  const std::size_t num_tasks = schedule.num_tasks();
  auto learner = make_learner(spec, config, dataset.dim(), seed);
  SeedResult result;
  result.seed = seed;
  result.accuracy_matrix = AccuracyMatrix(num_tasks);
  RunHooks* hooks = options.hooks;
  const Predictor predictor = [&](const Eigen::VectorXd& z) { return learner->predict(z); };

  for (std::size_t t = 1; t <= num_tasks; ++t) {
    const auto& classes = schedule.task(t);
    const DatasetView train = select_task(dataset, schedule, t, Split::kTrain, hooks);
    const DatasetView val = select_task(dataset, schedule, t, Split::kVal, hooks);
    check_task_data(t, classes, train);

    TaskRecord record;
    record.task = t;
    record.classes = classes;
    record.train_samples = train.size();
    record.past_hash_before = learner->past_hash(t, schedule);
    if (hooks) hooks->on_fit_begin(seed, t);
    learner->fit_task(t, classes, train, val, record);
    if (hooks) hooks->on_fit_end(seed, t);
    record.past_hash_after = learner->past_hash(t, schedule);
    if (record.past_hash_before != record.past_hash_after) result.frozen_past_ok = false;
    result.tasks.push_back(std::move(record));

    for (std::size_t i = 1; i <= t; ++i) {
      const auto eval = evaluate_task(predictor, dataset, schedule, i, t, config.accuracy_metric);
      result.accuracy_matrix.set(t, i, eval.value);
      if (hooks) hooks->on_predictions(seed, eval.log);
    }
  }
  result.forgetting = forgetting(result.accuracy_matrix);
  result.baac = union_baac(dataset, schedule, [&](const EmbeddingRecord& r) { return learner->predict(r.z()); });
  if (options.checkpoint_dir) learner->write_checkpoints(*options.checkpoint_dir, seed_prefix(seed));
  return result;
}

SeedResult run_single_seed(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                           const TaskSchedule& schedule, std::uint64_t seed, const RunOptions& options) {
  const std::size_t num_tasks = schedule.num_tasks();
  SeedResult result;
  result.seed = seed;
  result.accuracy_matrix = AccuracyMatrix(num_tasks);
  RunHooks* hooks = options.hooks;
  std::vector<MlpHead> heads;
  std::vector<double> own_task_acc;

  for (std::size_t t = 1; t <= num_tasks; ++t) {
    const auto& classes = schedule.task(t);
    const DatasetView train = select_task(dataset, schedule, t, Split::kTrain, hooks);
    const DatasetView val = select_task(dataset, schedule, t, Split::kVal, hooks);
    check_task_data(t, classes, train);
    TaskRecord record;
    record.task = t;
    record.classes = classes;
    record.train_samples = train.size();
    detail::Fnv1a before;
    for (const auto& h : heads) before.add(h.hash());
    record.past_hash_before = before.value();
    TrainConfig cfg = config.train;
    cfg.seed = derive_seed(seed, t);
    if (hooks) hooks->on_fit_begin(seed, t);
    auto trained = train_head(dataset.dim(), classes, train, val, cfg);
    if (hooks) hooks->on_fit_end(seed, t);
    record.mlp_history = std::move(trained.history);
    detail::Fnv1a after;
    for (const auto& h : heads) after.add(h.hash());
    record.past_hash_after = after.value();
    heads.push_back(std::move(trained.head));
    result.tasks.push_back(std::move(record));

    // Task-oracle routing: each task is scored by its own head only.
    const MlpHead& head = heads.back();
    const Predictor routed = [&](const Eigen::VectorXd& z) { return predict_global(std::span(&head, 1), z).label; };
    const auto eval = evaluate_task(routed, dataset, schedule, t, t, config.accuracy_metric);
    if (hooks) hooks->on_predictions(seed, eval.log);
    own_task_acc.push_back(eval.value);
    for (std::size_t i = 1; i <= t; ++i) result.accuracy_matrix.set(t, i, own_task_acc[i - 1]);
  }
  result.baac = union_baac(dataset, schedule, [&](const EmbeddingRecord& r) {
    const auto t = *schedule.task_of(r.label);
    return predict_global(std::span(&heads[t - 1], 1), r.z()).label;
  });
  if (options.checkpoint_dir) {
    for (std::size_t i = 0; i < heads.size(); ++i) {
      write_file(*options.checkpoint_dir / (seed_prefix(seed) + "_head" + std::to_string(i + 1) + ".mlph"),
                 [&](std::ostream& out) { write_head(heads[i], out); });
    }
  }
  return result;
}

SeedResult run_joint_seed(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                          const TaskSchedule& schedule, std::uint64_t seed, const RunOptions& options) {
  const std::size_t num_tasks = schedule.num_tasks();
  const auto classes = schedule.all_classes();
  RunHooks* hooks = options.hooks;
  const DatasetView train = select_classes(dataset, classes, Split::kTrain, hooks);
  const DatasetView val = select_classes(dataset, classes, Split::kVal, hooks);
  for (std::size_t t = 1; t <= num_tasks; ++t) {
    check_task_data(t, schedule.task(t), select_task(dataset, schedule, t, Split::kTrain));
  }

  SeedResult result;
  result.seed = seed;
  result.accuracy_matrix = AccuracyMatrix(num_tasks);
  TaskRecord record;
  record.task = num_tasks;
  record.classes = classes;
  record.train_samples = train.size();
  TrainConfig cfg = config.train;
  // Same stream as task 1 of SINGLE so that T = 1 reproduces it exactly.
  cfg.seed = derive_seed(seed, 1);
  if (hooks) hooks->on_fit_begin(seed, num_tasks);
  auto trained = train_head(dataset.dim(), classes, train, val, cfg);
  if (hooks) hooks->on_fit_end(seed, num_tasks);
  record.mlp_history = std::move(trained.history);
  result.tasks.push_back(std::move(record));

  const MlpHead& head = trained.head;
  const Predictor predictor = [&](const Eigen::VectorXd& z) { return predict_global(std::span(&head, 1), z).label; };
  for (std::size_t i = 1; i <= num_tasks; ++i) {
    const auto eval = evaluate_task(predictor, dataset, schedule, i, num_tasks, config.accuracy_metric);
    result.accuracy_matrix.set(num_tasks, i, eval.value);
    if (hooks) hooks->on_predictions(seed, eval.log);
  }
  result.baac = union_baac(dataset, schedule, [&](const EmbeddingRecord& r) { return predictor(r.z()); });
  if (options.checkpoint_dir) {
    write_file(*options.checkpoint_dir / (seed_prefix(seed) + "_joint.mlph"),
               [&](std::ostream& out) { write_head(head, out); });
  }
  return result;
}

template <typename Fn>
std::vector<SeedResult> run_seeds(const std::vector<std::uint64_t>& seeds, const RunOptions& options, Fn&& run_one) {
  std::vector<SeedResult> results(seeds.size());
  std::size_t workers = options.threads == 0 ? configured_threads() : options.threads;
  if (options.hooks) workers = 1;
  workers = std::max<std::size_t>(1, std::min(workers, seeds.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) results[i] = run_one(seeds[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < seeds.size(); i = next++) {
        try {
          results[i] = run_one(seeds[i]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

ResultsBundle assemble(const ExperimentConfig& config, const MethodSpec& spec, std::vector<SeedResult> runs) {
  ResultsBundle bundle;
  bundle.method = spec.to_string();
  bundle.config = config;
  bundle.dataset = config.dataset_name.empty()
                       ? std::filesystem::path(config.dataset_path).stem().string()
                       : config.dataset_name;
  bundle.config_hash = config_hash(config);
  std::sort(runs.begin(), runs.end(), [](const SeedResult& a, const SeedResult& b) { return a.seed < b.seed; });
  bundle.runs = std::move(runs);
  std::vector<double> baac, forget;
  bool all_forget = !bundle.runs.empty();
  for (const auto& r : bundle.runs) {
    baac.push_back(r.baac);
    if (r.forgetting) {
      forget.push_back(*r.forgetting);
    } else {
      all_forget = false;
    }
  }
  bundle.baac = summarize(baac);
  if (all_forget && !spec.is_reference()) bundle.forgetting = summarize(forget);
  return bundle;
}

std::vector<std::uint64_t> unique_seeds(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::uint64_t> out = seeds;
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw Error(ErrorCode::kConfig, "duplicate seeds in config");
  }
  return out;
}

}  // namespace

ResultsBundle run_reference(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                            const RunOptions& options) {
  const MethodSpec spec = parse_method(config.method);
  if (!spec.is_reference()) throw Error(ErrorCode::kConfig, "run_reference needs method single or joint");
  config.train.validate();
  const TaskSchedule schedule = build_schedule(config.schedule, dataset.num_classes());
  const auto seeds = unique_seeds(config.seeds);
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);
  auto runs = run_seeds(seeds, options, [&](std::uint64_t seed) {
    if (spec.kind == MethodSpec::Kind::kSingle) {
      auto r = run_single_seed(config, dataset, schedule, seed, options);
      r.forgetting.reset();
      return r;
    }
    return run_joint_seed(config, dataset, schedule, seed, options);
  });
  return assemble(config, spec, std::move(runs));
}

ResultsBundle run_experiment(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                             const RunOptions& options) {
  const MethodSpec spec = parse_method(config.method);
  if (spec.is_reference()) return run_reference(config, dataset, options);
  config.train.validate();
  const TaskSchedule schedule = build_schedule(config.schedule, dataset.num_classes());
  const auto seeds = unique_seeds(config.seeds);
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);
  auto runs = run_seeds(seeds, options, [&](std::uint64_t seed) {
    return run_cil_seed(config, spec, dataset, schedule, seed, options);
  });
  return assemble(config, spec, std::move(runs));
}

ResultsBundle run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  parse_method(config.method);
  const auto dataset = load_dataset(config.dataset_path, config.dataset_format);
  return run_experiment(config, dataset, options);
}

}  // namespace frozencil
