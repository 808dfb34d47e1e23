#include <gtest/gtest.h>

#include <random>

#include "frozencil/error.hpp"
#include "frozencil/prototypes.hpp"
#include "oracles.hpp"

using namespace frozencil;

namespace {

EmbeddingRecord rec(std::uint64_t id, const Eigen::VectorXd& v, ClassId label) {
  EmbeddingRecord r;
  r.sample_id = id;
  r.embedding = v.cast<float>();
  r.label = label;
  return r;
}

EmbeddingDataset random_classes(std::mt19937_64& rng, std::size_t d, std::size_t k, std::size_t per_class,
                                double spread = 3.0) {
  std::normal_distribution<double> n(0, 1);
  std::vector<std::string> names;
  std::vector<EmbeddingRecord> recs;
  std::uint64_t id = 0;
  for (std::size_t c = 0; c < k; ++c) {
    names.push_back("k" + std::to_string(c));
    Eigen::VectorXd centre(static_cast<Eigen::Index>(d));
    for (auto& v : centre) v = spread * n(rng);
    for (std::size_t i = 0; i < per_class; ++i) {
      Eigen::VectorXd x = centre;
      for (auto& v : x) v += n(rng);
      recs.push_back(rec(id++, x, static_cast<ClassId>(c)));
    }
  }
  return EmbeddingDataset(d, names, recs);
}

DatasetView all_of(const EmbeddingDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return DatasetView(ds, idx);
}

PrototypeEntry entry(ClassId c, Eigen::VectorXd v) {
  return PrototypeEntry{c, v, 1, v, v};
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kState;
}

}  // namespace

TEST(Fit, MeanOfOne) {
  const EmbeddingDataset ds(2, {"a", "b"}, {rec(0, Eigen::Vector2d(1, 2), 0), rec(1, Eigen::Vector2d(-3, 4), 1)});
  const auto e = fit_prototypes(all_of(ds), FeatureTransform::identity());
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].prototype, Eigen::Vector2d(1, 2));
  EXPECT_EQ(e[1].prototype, Eigen::Vector2d(-3, 4));
}

TEST(Fit, Midpoint) {
  const EmbeddingDataset ds(2, {"a"}, {rec(0, Eigen::Vector2d(1, 0), 0), rec(1, Eigen::Vector2d(0, 1), 0)});
  const auto e = fit_prototypes(all_of(ds), FeatureTransform::identity());
  EXPECT_TRUE(e[0].prototype.isApprox(Eigen::Vector2d(0.5, 0.5), 1e-15));
  EXPECT_EQ(e[0].count, 2u);
}

TEST(Fit, MatchesAccumulateThenDivide) {
  std::mt19937_64 rng(1);
  const auto ds = random_classes(rng, 9, 4, 50);
  const auto e = fit_prototypes(all_of(ds), FeatureTransform::identity());
  std::vector<oracle::Vec> xs;
  std::vector<unsigned> ys;
  for (const auto& r : ds.records()) {
    xs.push_back(oracle::to_vec(r.z()));
    ys.push_back(r.label);
  }
  const auto want = oracle::class_means(xs, ys);
  for (const auto& pe : e) {
    for (Eigen::Index j = 0; j < 9; ++j) {
      EXPECT_NEAR(pe.prototype(j), want.at(pe.label)[static_cast<std::size_t>(j)], 1e-9);
      EXPECT_NEAR(pe.raw_mean(j), want.at(pe.label)[static_cast<std::size_t>(j)], 1e-9);
    }
  }
}

TEST(Fit, NormalisedSpaceAveragesNormalisedSamples) {
  const EmbeddingDataset ds(2, {"a"}, {rec(0, Eigen::Vector2d(3, 0), 0), rec(1, Eigen::Vector2d(0, 1), 0)});
  const auto e = fit_prototypes(all_of(ds), FeatureTransform::identity(true));
  EXPECT_TRUE(e[0].prototype.isApprox(Eigen::Vector2d(0.5, 0.5), 1e-15));
  EXPECT_TRUE(e[0].raw_mean.isApprox(Eigen::Vector2d(1.5, 0.5), 1e-15));
}

TEST(Fit, EmptyViewIsDataError) {
  const EmbeddingDataset ds(2, {"a"}, {});
  EXPECT_EQ(code_of([&] { fit_prototypes(all_of(ds), FeatureTransform::identity()); }), ErrorCode::kData);
}

TEST(Bank, EmptyPlusTwo) {
  const PrototypeBank bank(SpaceId{});
  const PrototypeEntry es[] = {entry(0, Eigen::Vector2d(0, 0)), entry(1, Eigen::Vector2d(1, 1))};
  EXPECT_EQ(add_task(bank, es, SpaceId{}).size(), 2u);
  EXPECT_TRUE(bank.empty());
}

TEST(Bank, CollisionIsConflict) {
  PrototypeBank bank(SpaceId{});
  const PrototypeEntry a[] = {entry(3, Eigen::Vector2d(0, 0))};
  bank.add(a);
  EXPECT_EQ(code_of([&] { bank.add(a); }), ErrorCode::kConflict);
}

TEST(Bank, SpaceMismatchIsConfigError) {
  const PrototypeBank bank(SpaceId{});
  const PrototypeEntry a[] = {entry(0, Eigen::Vector2d(0, 0))};
  EXPECT_EQ(code_of([&] { add_task(bank, a, SpaceId{SpaceKind::kIdentity, true}); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] {
              PrototypeBank b(SpaceId{});
              b.add(a);
              nmc_predict(b, FeatureTransform::identity(true), Eigen::Vector2d(1, 0));
            }),
            ErrorCode::kConfig);
}

TEST(Bank, OrderIndependentContents) {
  const PrototypeEntry t1[] = {entry(0, Eigen::Vector2d(0, 1)), entry(1, Eigen::Vector2d(2, 3))};
  const PrototypeEntry t2[] = {entry(2, Eigen::Vector2d(4, 5))};
  const auto ab = add_task(add_task(PrototypeBank(SpaceId{}), t1, SpaceId{}), t2, SpaceId{});
  const auto ba = add_task(add_task(PrototypeBank(SpaceId{}), t2, SpaceId{}), t1, SpaceId{});
  const ClassId all[] = {0, 1, 2};
  EXPECT_EQ(ab.hash(all), ba.hash(all));
  EXPECT_EQ(ab.size(), ba.size());
}

TEST(BankProperty, EarlierEntriesUnchangedByLaterTasks) {
  std::mt19937_64 rng(2);
  const auto ds = random_classes(rng, 5, 6, 10);
  const TaskSchedule s({{0, 1}, {2, 3}, {4, 5}});
  for (const auto& tf : {FeatureTransform::identity(), FeatureTransform::identity(true),
                         FeatureTransform::random_projection(init_random_projection(5, 64, 3))}) {
    PrototypeBank bank(tf.space());
    for (std::size_t t = 1; t <= 3; ++t) {
      const auto past = s.classes_through(t - 1);
      const auto before = bank.hash(past);
      bank = add_task(bank, fit_prototypes(select_task(ds, s, t, Split::kTrain), tf), tf.space());
      EXPECT_EQ(bank.hash(past), before);
    }
  }
}

TEST(Predict, ExactPrototypeWins) {
  PrototypeBank bank(SpaceId{});
  const PrototypeEntry es[] = {entry(1, Eigen::Vector2d(0, 0)), entry(3, Eigen::Vector2d(5, 5)),
                               entry(4, Eigen::Vector2d(9, 0))};
  bank.add(es);
  EXPECT_EQ(nmc_predict(bank, FeatureTransform::identity(), Eigen::Vector2d(5, 5)), 3u);
}

TEST(Predict, EquidistantGoesToLowerClass) {
  PrototypeBank bank(SpaceId{});
  const PrototypeEntry es[] = {entry(7, Eigen::Vector2d(1, 0)), entry(2, Eigen::Vector2d(-1, 0))};
  bank.add(es);
  EXPECT_EQ(nmc_predict(bank, FeatureTransform::identity(), Eigen::Vector2d(0, 3)), 2u);
}

TEST(Predict, EmptyBankIsStateError) {
  EXPECT_EQ(code_of([] { nmc_predict(PrototypeBank(SpaceId{}), FeatureTransform::identity(), Eigen::Vector2d(1, 1)); }),
            ErrorCode::kState);
}

TEST(Predict, MatchesExhaustiveTable) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = random_classes(rng, 6, 5, 8, 1.0);
    PrototypeBank bank(SpaceId{});
    bank.add(fit_prototypes(all_of(ds), FeatureTransform::identity()));
    std::map<unsigned, oracle::Vec> centres;
    for (const auto& [c, e] : bank.entries()) centres[c] = oracle::to_vec(e.prototype);
    for (int q = 0; q < 20; ++q) {
      Eigen::VectorXd z(6);
      for (auto& v : z) v = n(rng);
      EXPECT_EQ(nmc_predict(bank, FeatureTransform::identity(), z), oracle::nearest(centres, oracle::to_vec(z)));
    }
  }
}

TEST(PredictProperty, NormalisedMatchesCosineArgmax) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = random_classes(rng, 4, 5, 10);
    const auto tf = FeatureTransform::identity(true);
    PrototypeBank bank(tf.space());
    bank.add(fit_prototypes(all_of(ds), tf));
    for (int q = 0; q < 30; ++q) {
      Eigen::VectorXd z(4);
      for (auto& v : z) v = n(rng);
      const Eigen::VectorXd u = z.normalized();
      // Cosine with the (non-unit) prototype is not equivalent; the equivalence is
      // argmin ||u - p||^2 = argmax (u.p - ||p||^2 / 2). Check that form.
      ClassId best = 0;
      double best_s = -1e300;
      for (const auto& [c, e] : bank.entries()) {
        const double s = u.dot(e.prototype) - 0.5 * e.prototype.squaredNorm();
        if (s > best_s) {
          best_s = s;
          best = c;
        }
      }
      EXPECT_EQ(nmc_predict(bank, tf, z), best);
    }
  }
}

TEST(PredictProperty, ScaleCovariantUnderIdentity) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto ds = random_classes(rng, 3, 4, 10);
    const double a = 0.5 + trial;
    std::vector<EmbeddingRecord> scaled;
    for (auto r : ds.records()) {
      r.embedding *= static_cast<float>(a);
      scaled.push_back(r);
    }
    const EmbeddingDataset ds2(3, ds.class_names(), scaled);
    PrototypeBank b1(SpaceId{}), b2(SpaceId{});
    b1.add(fit_prototypes(all_of(ds), FeatureTransform::identity()));
    b2.add(fit_prototypes(all_of(ds2), FeatureTransform::identity()));
    for (int q = 0; q < 30; ++q) {
      Eigen::VectorXd z(3);
      for (auto& v : z) v = n(rng);
      EXPECT_EQ(nmc_predict(b1, FeatureTransform::identity(), z),
                nmc_predict(b2, FeatureTransform::identity(), a * z));
    }
  }
}

TEST(Reproject, AffinePrototypesEqualMeanOfProjectedSamples) {
  std::mt19937_64 rng(6);
  const auto ds = random_classes(rng, 6, 3, 30);
  auto st = make_stream_stats(6);
  const auto view = all_of(ds);
  update_stats(st, view.matrix(), view.labels());
  const auto tf = FeatureTransform::pca(pca_fit(st, 4));
  const auto entries = fit_prototypes(view, tf);
  for (const auto& e : entries) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
    std::size_t n = 0;
    for (std::size_t i = 0; i < view.size(); ++i) {
      if (view[i].label != e.label) continue;
      acc += tf.apply(view[i].z());
      ++n;
    }
    EXPECT_TRUE(e.prototype.isApprox(acc / static_cast<double>(n), 1e-9));
  }
  PrototypeBank bank(tf.space());
  bank.add(entries);
  EXPECT_EQ(code_of([&] { bank.reproject(FeatureTransform::identity()); }), ErrorCode::kConfig);
}
