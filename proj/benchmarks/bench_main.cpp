#include <benchmark/benchmark.h>

#include <random>

#include "frozencil/hyperbolic.hpp"
#include "frozencil/mlp.hpp"
#include "frozencil/prototypes.hpp"

using namespace frozencil;

namespace {

Eigen::VectorXd random_vec(std::mt19937_64& rng, Eigen::Index n, double s = 1.0) {
  std::normal_distribution<double> g(0, s);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void BM_HeadForward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto head = init_head(d, {256, 128}, {0, 1, 2, 3}, 1);
  std::mt19937_64 rng(2);
  const Eigen::VectorXd z = random_vec(rng, static_cast<Eigen::Index>(d));
  for (auto _ : state) benchmark::DoNotOptimize(head_forward(head, z));
}
BENCHMARK(BM_HeadForward)->Arg(768)->Arg(1536);

void BM_NmcPredict(benchmark::State& state) {
  const auto k = static_cast<ClassId>(state.range(0));
  const std::size_t d = 768;
  std::mt19937_64 rng(3);
  PrototypeBank bank(SpaceId{});
  std::vector<PrototypeEntry> entries;
  for (ClassId c = 0; c < k; ++c) {
    const Eigen::VectorXd p = random_vec(rng, d);
    entries.push_back(PrototypeEntry{c, p, 1, p, p});
  }
  bank.add(entries);
  const auto tf = FeatureTransform::identity();
  const Eigen::VectorXd z = random_vec(rng, d);
  for (auto _ : state) benchmark::DoNotOptimize(nmc_predict(bank, tf, z));
}
BENCHMARK(BM_NmcPredict)->Arg(7)->Arg(100);

void BM_PoincareDistance(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto p = state.range(0);
  const BallPoint x = exp_map0(random_vec(rng, p, 0.3), 1.0);
  const BallPoint y = exp_map0(random_vec(rng, p, 0.3), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(poincare_distance(x, y));
}
BENCHMARK(BM_PoincareDistance)->Arg(128);

void BM_TrainEpoch(benchmark::State& state) {
  SynthSpec spec;
  spec.n_classes = 4;
  spec.dim = 64;
  spec.samples_per_class = 300;
  const auto ds = generate_synthetic(spec);
  const TaskSchedule s({{0, 1, 2, 3}});
  const auto train = select_task(ds, s, 1, Split::kTrain);
  const auto val = select_task(ds, s, 1, Split::kVal);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_head(ds.dim(), {0, 1, 2, 3}, train, val, cfg));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
