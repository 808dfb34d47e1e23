// Acceptance checks. One line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "frozencil/error.hpp"
#include "frozencil/hyperbolic.hpp"
#include "frozencil/metrics.hpp"
#include "frozencil/mlp.hpp"
#include "frozencil/projections.hpp"
#include "frozencil/prototypes.hpp"
#include "frozencil/report.hpp"
#include "frozencil/runner.hpp"
#include "../oracles.hpp"

using namespace frozencil;

namespace {

// Pinned tolerances.
constexpr double kMlpGradTol = 1e-4;
constexpr double kHypGradTol = 1e-3;
constexpr double kRoundTripTol = 1e-9;
constexpr double kLn3Tol = 1e-9;
constexpr double kMobiusTol = 1e-9;
constexpr double kSymmetryTol = 1e-12;
constexpr double kMeanTol = 1e-9;
constexpr double kCovTol = 1e-7;
constexpr double kPcaTol = 1e-5;
constexpr double kLdaCosTol = 1e-6;
constexpr double kReplayTol = 1e-12;

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Detail {
 public:
  template <typename T>
  Detail& operator<<(const T& v) {
    out_ << v;
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

int g_failures = 0;

void criterion(const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) {
    o.ok = false;
    o.detail += "; over time limit";
  }
  if (!o.ok) ++g_failures;
  std::printf("[%s] %s: %s (%.2f s", o.ok ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  if (limit_s > 0) std::printf(", limit %.0f s", limit_s);
  std::printf(")\n");
  std::fflush(stdout);
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
  std::normal_distribution<double> n(0, s);
  Eigen::MatrixXd m(r, c);
  for (auto& v : m.reshaped()) v = n(rng);
  return m;
}

std::vector<oracle::Vec> columns(const Eigen::MatrixXd& m) {
  std::vector<oracle::Vec> out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(oracle::to_vec(m.col(j)));
  return out;
}

BallPoint random_point(std::mt19937_64& rng, Eigen::Index p, double max_r) {
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::VectorXd x = gaussian(rng, p, 1).col(0);
  x *= max_r * u(rng) / x.norm();
  return BallPoint{x, 1.0};
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  std::mt19937_64 rng(101);
  double worst_mlp = 0.0;
  std::size_t n_mlp = 0;
  for (int trial = 0; trial < 4; ++trial) {
    auto h = init_head(6, {7, 5}, {0, 1, 2}, rng());
    for (auto& p : h.mutable_params()) p += gaussian(rng, p.rows(), p.cols(), 0.1);
    const Eigen::MatrixXd x = gaussian(rng, 6, 9);
    std::vector<std::size_t> y(9);
    for (auto& v : y) v = rng() % 3;
    const auto lg = loss_and_grad(h, x, y);
    for (std::size_t t = 0; t < 6; ++t) {
      auto& m = h.mutable_params()[t];
      for (int s = 0; s < 6; ++s) {
        const Eigen::Index idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m.size()));
        double& w = m.reshaped()(idx);
        const double w0 = w;
        const double fd = oracle::central_diff(
            [&](double v) {
              w = v;
              return loss_and_grad(h, x, y).loss;
            },
            w0, 1e-5);
        w = w0;
        worst_mlp = std::max(worst_mlp, oracle::rel_err(lg.grads[t].reshaped()(idx), fd, 1e-7));
        ++n_mlp;
      }
    }
  }

  double worst_hyp = 0.0;
  std::size_t n_hyp = 0;
  for (int trial = 0; trial < 4; ++trial) {
    auto params = init_hyp_projection(5, 3, rng(), 0.5, 1.0, 0.5, trial % 2 == 1);
    const Eigen::MatrixXd x = gaussian(rng, 5, 12);
    std::vector<std::size_t> t(12);
    for (auto& v : t) v = rng() % 3;
    std::vector<BallPoint> protos;
    for (int c = 0; c < 3; ++c) protos.push_back(random_point(rng, 3, 0.6));
    const auto lg = hyp_loss_and_grad(params, x, t, protos);
    for (Eigen::Index i = 0; i < params.weights.size(); ++i) {
      double& w = params.weights.reshaped()(i);
      const double w0 = w;
      const double fd = oracle::central_diff(
          [&](double v) {
            w = v;
            return hyp_loss_and_grad(params, x, t, protos).loss;
          },
          w0, 1e-5);
      w = w0;
      worst_hyp = std::max(worst_hyp, oracle::rel_err(lg.grad.reshaped()(i), fd, 1e-6));
      ++n_hyp;
    }
  }
  const bool ok = n_mlp >= 100 && worst_mlp <= kMlpGradTol && worst_hyp <= kHypGradTol;
  return {ok, (Detail() << "mlp worst rel err " << worst_mlp << " over " << n_mlp << " coords (tol "
                        << kMlpGradTol << "); hyp worst " << worst_hyp << " over " << n_hyp << " coords (tol "
                        << kHypGradTol << ")")
                  .str()};
}

Outcome geometry() {
  std::mt19937_64 rng(102);
  double rt = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd v = gaussian(rng, 4, 1, 0.7).col(0);
    rt = std::max(rt, (log_map0(exp_map0(v, 1.0)) - v).norm());
  }
  const double ln3 = std::abs(
      poincare_distance(BallPoint{Eigen::Vector2d(0, 0), 1.0}, BallPoint{Eigen::Vector2d(0.5, 0), 1.0}) -
      std::log(3.0));
  double mob = 0.0, sym = 0.0;
  bool closed = true;
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_point(rng, 3, 0.95), y = random_point(rng, 3, 0.95);
    const BallPoint zero{Eigen::VectorXd::Zero(3), 1.0};
    mob = std::max(mob, (mobius_add(x, zero).x - x.x).norm());
    mob = std::max(mob, (mobius_add(zero, x).x - x.x).norm());
    mob = std::max(mob, mobius_add(mobius_neg(x), x).x.norm());
    closed = closed && mobius_add(x, y).x.norm() < 1.0;
    sym = std::max(sym, std::abs(poincare_distance(x, y) - poincare_distance(y, x)));
  }
  const bool ok = rt <= kRoundTripTol && ln3 <= kLn3Tol && mob <= kMobiusTol && closed && sym <= kSymmetryTol;
  return {ok, (Detail() << "exp/log " << rt << "; |d - ln 3| " << ln3 << "; mobius identity/inverse " << mob
                        << ", closure " << (closed ? "ok" : "violated") << "; asymmetry " << sym)
                  .str()};
}

Outcome oracles() {
  std::mt19937_64 rng(103);
  Detail d;
  bool ok = true;

  // Prototype means and NMC predictions.
  double mean_err = 0.0;
  std::size_t nmc_mismatch = 0, nmc_total = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = 2 + rng() % 15, k = 2 + rng() % 6;
    std::vector<EmbeddingRecord> recs;
    std::vector<oracle::Vec> xs;
    std::vector<unsigned> ys;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) {
      names.push_back("c" + std::to_string(c));
      const Eigen::VectorXd centre = gaussian(rng, static_cast<Eigen::Index>(dim), 1, 2.0).col(0);
      const std::size_t n = 1 + rng() % 60;
      for (std::size_t i = 0; i < n; ++i) {
        EmbeddingRecord r;
        r.sample_id = recs.size();
        r.embedding = (centre + gaussian(rng, static_cast<Eigen::Index>(dim), 1).col(0)).cast<float>();
        r.label = static_cast<ClassId>(c);
        xs.push_back(oracle::to_vec(r.z()));
        ys.push_back(r.label);
        recs.push_back(std::move(r));
      }
    }
    const EmbeddingDataset ds(dim, names, recs);
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    PrototypeBank bank(SpaceId{});
    bank.add(fit_prototypes(DatasetView(ds, idx), FeatureTransform::identity()));
    const auto want = oracle::class_means(xs, ys);
    std::map<unsigned, oracle::Vec> centres;
    for (const auto& [c, e] : bank.entries()) {
      centres[c] = oracle::to_vec(e.prototype);
      for (std::size_t j = 0; j < dim; ++j) {
        mean_err = std::max(mean_err, std::abs(e.prototype(static_cast<Eigen::Index>(j)) - want.at(c)[j]));
      }
    }
    for (int q = 0; q < 50; ++q) {
      const Eigen::VectorXd z = gaussian(rng, static_cast<Eigen::Index>(dim), 1, 2.0).col(0);
      if (nmc_predict(bank, FeatureTransform::identity(), z) != oracle::nearest(want, oracle::to_vec(z))) {
        ++nmc_mismatch;
      }
      ++nmc_total;
    }
  }
  ok = ok && mean_err <= kMeanTol && nmc_mismatch == 0;
  d << "means " << mean_err << "; nmc " << nmc_mismatch << "/" << nmc_total << " mismatches";

  // Streaming covariance, chunked.
  double cov_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 15);
    const Eigen::MatrixXd x = gaussian(rng, dim, 400, 3.0).colwise() + gaussian(rng, dim, 1, 5.0).col(0);
    auto st = make_stream_stats(static_cast<std::size_t>(dim));
    const std::vector<ClassId> y(400, 0);
    for (Eigen::Index s = 0; s < 400; s += 37) {
      const Eigen::Index n = std::min<Eigen::Index>(37, 400 - s);
      update_stats(st, x.middleCols(s, n), std::span(y).subspan(static_cast<std::size_t>(s), static_cast<std::size_t>(n)));
    }
    const auto want = oracle::two_pass_covariance(columns(x));
    const Eigen::MatrixXd got = st.covariance();
    for (Eigen::Index a = 0; a < dim; ++a) {
      for (Eigen::Index b = 0; b < dim; ++b) {
        cov_err = std::max(cov_err, std::abs(got(a, b) - want[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]));
      }
    }
  }
  ok = ok && cov_err <= kCovTol;
  d << "; covariance " << cov_err;

  // PCA against Jacobi.
  double pca_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index dim = 4 + static_cast<Eigen::Index>(rng() % 13);
    Eigen::MatrixXd x = gaussian(rng, dim, 300);
    for (Eigen::Index r = 0; r < dim; ++r) x.row(r) *= 1.0 + 0.7 * static_cast<double>(r);
    const Eigen::MatrixXd mix = gaussian(rng, dim, dim).householderQr().householderQ();
    x = mix * x;
    auto st = make_stream_stats(static_cast<std::size_t>(dim));
    update_stats(st, x, std::vector<ClassId>(300, 0));
    const auto m = pca_fit(st, 3);
    const auto eig = oracle::jacobi_eigen(oracle::two_pass_covariance(columns(x)));
    for (std::size_t k = 0; k < 3; ++k) {
      const auto want = oracle::sign_fixed(eig.vectors[k]);
      for (Eigen::Index j = 0; j < dim; ++j) {
        pca_err = std::max(pca_err, std::abs(m.components(static_cast<Eigen::Index>(k), j) - want[static_cast<std::size_t>(j)]));
      }
    }
  }
  ok = ok && pca_err <= kPcaTol;
  d << "; pca " << pca_err;

  // Two-class LDA against S_W^{-1} (mu_1 - mu_0), scatter and solve by hand.
  double lda_err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 15);
    Eigen::MatrixXd x = gaussian(rng, dim, 200);
    std::vector<ClassId> y(200);
    const Eigen::VectorXd shift = gaussian(rng, dim, 1, 3.0).col(0);
    for (Eigen::Index j = 0; j < 200; ++j) {
      y[static_cast<std::size_t>(j)] = static_cast<ClassId>(j % 2);
      if (j % 2) x.col(j) += shift;
    }
    auto st = make_stream_stats(static_cast<std::size_t>(dim));
    update_stats(st, x, y);
    const auto m = lda_fit(st, 0.0);
    const auto cols = columns(x);
    const auto mu = oracle::class_means(cols, {y.begin(), y.end()});
    const auto n = static_cast<std::size_t>(dim);
    oracle::Mat sw(n, oracle::Vec(n, 0.0));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto& c = mu.at(y[i]);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) sw[a][b] += (cols[i][a] - c[a]) * (cols[i][b] - c[b]);
      }
    }
    oracle::Vec dmu(n);
    for (std::size_t a = 0; a < n; ++a) dmu[a] = mu.at(1)[a] - mu.at(0)[a];
    const auto w = oracle::solve(sw, dmu);
    double dot = 0.0, nw = 0.0, ng = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const double g = m.directions(0, static_cast<Eigen::Index>(a));
      dot += g * w[a];
      nw += w[a] * w[a];
      ng += g * g;
    }
    lda_err = std::max(lda_err, 1.0 - std::abs(dot) / std::sqrt(nw * ng));
  }
  ok = ok && lda_err <= kLdaCosTol;
  d << "; lda 1-|cos| " << lda_err;

  // a_{k,i} replayed from per-sample logs.
  struct LogHooks : RunHooks {
    std::vector<PredictionLog> logs;
    void on_predictions(std::uint64_t, std::span<const PredictionLog> l) override {
      logs.insert(logs.end(), l.begin(), l.end());
    }
  };
  SynthSpec spec;
  spec.n_classes = 6;
  spec.dim = 8;
  spec.samples_per_class = 120;
  spec.noise_std = 3.0;  // overlap keeps the matrix away from all ones
  spec.seed = 5;
  const auto ds = generate_synthetic(spec);
  ExperimentConfig cfg;
  cfg.dataset_name = "synth";
  cfg.schedule.tasks = 3;
  cfg.seeds = {0};
  double replay_err = 0.0;
  std::size_t cells = 0;
  for (const char* method : {"nmc:base", "mlp"}) {
    cfg.method = method;
    LogHooks hooks;
    RunOptions opt;
    opt.hooks = &hooks;
    const auto b = run_experiment(cfg, ds, opt);
    std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<unsigned>, std::vector<unsigned>>> groups;
    for (const auto& l : hooks.logs) {
      auto& g = groups[{l.trained_through, l.task}];
      g.first.push_back(l.prediction);
      g.second.push_back(l.label);
    }
    for (const auto& [key, g] : groups) {
      const auto got = b.runs[0].accuracy_matrix.get(key.first, key.second);
      if (!got) {
        replay_err = 1.0;
        continue;
      }
      replay_err = std::max(replay_err, std::abs(*got - oracle::confusion_baac(g.first, g.second)));
      ++cells;
    }
  }
  ok = ok && replay_err <= kReplayTol && cells == 12;
  d << "; a_{k,i} replay " << replay_err << " over " << cells << " cells";
  return {ok, d.str()};
}

Outcome metric_formulas() {
  const std::vector<ClassId> y{0, 1, 1, 2};
  const double b1 = balanced_accuracy(y, y);
  const std::vector<ClassId> labels{0, 0, 1, 1}, preds{0, 0, 1, 0};
  const double b2 = balanced_accuracy(preds, labels);
  AccuracyMatrix m(3);
  m.set(1, 1, 0.9);
  m.set(2, 1, 0.8);
  m.set(3, 1, 0.7);
  m.set(2, 2, 0.95);
  m.set(3, 2, 0.85);
  m.set(3, 3, 0.99);
  const double f = *forgetting(m);
  AccuracyMatrix c(4);
  for (std::size_t k = 1; k <= 4; ++k) {
    for (std::size_t i = 1; i <= k; ++i) c.set(k, i, 0.7);
  }
  const double fc = *forgetting(c);
  // 0.15 is not representable; compare to the same expression evaluated directly.
  const double want = ((0.9 - 0.7) + (0.95 - 0.85)) / 2.0;
  const bool ok = b1 == 1.0 && b2 == 0.75 && f == want && fc == 0.0;
  return {ok, (Detail() << "BAAC " << b1 << ", " << b2 << "; F worked example " << f << "; constant F " << fc).str()};
}

SynthSpec e2e_spec() {
  SynthSpec spec;
  spec.n_classes = 4;
  spec.dim = 8;
  spec.mean_scale = 10.0;
  spec.noise_std = 0.5;
  return spec;
}

ExperimentConfig e2e_config(const std::string& method) {
  ExperimentConfig cfg;
  cfg.dataset_name = "synth";
  cfg.method = method;
  cfg.schedule.tasks = 2;
  cfg.seeds = {0, 1, 2};
  return cfg;
}

const char* const kCilMethods[] = {"mlp",     "nmc:base",     "nmc:norm", "nmc:rp",       "nmc:rp_norm",
                                   "nmc:hyp", "nmc:hyp_norm", "nmc:pca",  "nmc:pca_norm", "nmc:lda"};

Outcome end_to_end() {
  const auto ds = generate_synthetic(e2e_spec());
  bool ok = true;
  Detail d;
  for (const char* method : kCilMethods) {
    const auto b = run_experiment(e2e_config(method), ds);
    const std::string m = method;
    double min_baac = 1.0, max_f = 0.0;
    bool frozen = true;
    for (const auto& r : b.runs) {
      min_baac = std::min(min_baac, r.baac);
      max_f = std::max(max_f, std::abs(r.forgetting.value_or(1.0)));
      frozen = frozen && r.frozen_past_ok;
    }
    const double need = (m == "mlp" || m == "nmc:base" || m == "nmc:norm") ? 0.99 : 0.95;
    bool this_ok = frozen && min_baac >= need;
    if (m == "mlp" || m == "nmc:base") this_ok = this_ok && max_f <= 0.01;
    ok = ok && this_ok;
    d << (d.str().empty() ? "" : "; ") << m << " min BAAC " << min_baac;
    if (m == "mlp" || m == "nmc:base") d << " max|F| " << max_f;
    if (!frozen) d << " frozen-past FAILED";
    if (!this_ok) d << " (need " << need << ")";
  }
  return {ok, d.str()};
}

class AccessTracker : public RunHooks {
 public:
  explicit AccessTracker(TaskSchedule s) : schedule_(std::move(s)) {}
  void on_fit_begin(std::uint64_t, std::size_t task) override { task_ = task; }
  void on_fit_end(std::uint64_t, std::size_t) override { task_ = 0; }
  void on_read(const EmbeddingRecord& r) override {
    if (task_ == 0) return;
    ++reads;
    const auto owner = schedule_.task_of(r.label);
    if (r.split == Split::kTrain && owner && *owner < task_) ++violations;
    if (r.split == Split::kTest) ++violations;
  }
  std::size_t reads = 0;
  std::size_t violations = 0;

 private:
  TaskSchedule schedule_;
  std::size_t task_ = 0;
};

Outcome no_replay() {
  const auto ds = generate_synthetic(e2e_spec());
  bool ok = true;
  Detail d;
  std::vector<std::string> methods(std::begin(kCilMethods), std::end(kCilMethods));
  methods.push_back("single");
  std::size_t total_reads = 0;
  for (const auto& m : methods) {
    auto cfg = e2e_config(m);
    cfg.schedule.tasks = 3;
    AccessTracker tracker(build_schedule(cfg.schedule, ds.num_classes()));
    RunOptions opt;
    opt.hooks = &tracker;
    run_experiment(cfg, ds, opt);
    total_reads += tracker.reads;
    if (tracker.violations != 0 || tracker.reads == 0) {
      ok = false;
      d << m << ": " << tracker.violations << " prior-task reads of " << tracker.reads << "; ";
    }
  }
  d << "0 prior-task train reads across " << methods.size() << " methods (" << total_reads
    << " tracked reads); joint pools all tasks by definition and is not tracked";
  return {ok, d.str()};
}

Outcome determinism() {
  const auto ds = generate_synthetic(e2e_spec());
  bool ok = true;
  std::size_t bytes = 0;
  Detail d;
  std::vector<std::string> methods(std::begin(kCilMethods), std::end(kCilMethods));
  methods.push_back("single");
  methods.push_back("joint");
  for (const auto& m : methods) {
    RunOptions a, b;
    a.threads = 1;
    b.threads = 3;
    const auto ja = bundle_to_json(run_experiment(e2e_config(m), ds, a));
    const auto jb = bundle_to_json(run_experiment(e2e_config(m), ds, b));
    bytes += ja.size();
    if (ja != jb) {
      ok = false;
      d << m << " differs; ";
    }
  }
  d << methods.size() << " methods byte-identical across two runs (" << bytes << " bytes of JSON)";
  return {ok, d.str()};
}

}  // namespace

int main() {
  criterion("gradient correctness", 30, gradients);
  criterion("geometry suite", 10, geometry);
  criterion("oracle equivalence", 60, oracles);
  criterion("metric formulas", 0, metric_formulas);
  criterion("end-to-end synthetic CIL", 120, end_to_end);
  criterion("no-replay enforcement", 0, no_replay);
  criterion("determinism", 0, determinism);
  std::printf("%d failing criteria\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
