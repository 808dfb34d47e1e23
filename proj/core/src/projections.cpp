#include "frozencil/projections.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "frozencil/error.hpp"

namespace frozencil {

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& z) {
  const double norm = z.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::kDegenerate, "cannot normalise a zero vector");
  return z / norm;
}

RandomProj init_random_projection(std::size_t input_dim, std::size_t output_dim,
                                  std::uint64_t seed, bool relu) {
  if (input_dim == 0 || output_dim == 0) {
    throw Error(ErrorCode::kConfig, "random projection dimensions must be positive");
  }
  RandomProj p;
  p.seed = seed;
  p.relu = relu;
  p.weights.resize(static_cast<Eigen::Index>(output_dim), static_cast<Eigen::Index>(input_dim));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(output_dim)));
  for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.weights.cols(); ++c) p.weights(r, c) = normal(rng);
  }
  return p;
}

Eigen::VectorXd apply_random_projection(const RandomProj& proj, const Eigen::VectorXd& z) {
  if (static_cast<std::size_t>(z.size()) != proj.input_dim()) {
    throw Error(ErrorCode::kDimension, "random projection expects dimension " +
                                           std::to_string(proj.input_dim()) + ", got " +
                                           std::to_string(z.size()));
  }
  Eigen::VectorXd out = proj.weights * z;
  if (proj.relu) out = out.cwiseMax(0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Streaming statistics

StreamStats make_stream_stats(std::size_t dim) {
  StreamStats s;
  const auto d = static_cast<Eigen::Index>(dim);
  s.sum = Eigen::VectorXd::Zero(d);
  s.outer_sum = Eigen::MatrixXd::Zero(d, d);
  return s;
}

Eigen::VectorXd StreamStats::mean() const {
  if (n == 0) throw Error(ErrorCode::kData, "statistics are empty");
  return sum / static_cast<double>(n);
}

Eigen::MatrixXd StreamStats::covariance() const {
  const Eigen::VectorXd mu = mean();
  Eigen::MatrixXd cov = outer_sum / static_cast<double>(n) - mu * mu.transpose();
  return 0.5 * (cov + cov.transpose());
}

void update_stats(StreamStats& stats, const Eigen::MatrixXd& samples,
                  std::span<const ClassId> labels) {
  if (stats.sum.size() == 0 && stats.n == 0) stats = make_stream_stats(static_cast<std::size_t>(samples.rows()));
  if (samples.rows() != stats.sum.size()) {
    throw Error(ErrorCode::kDimension, "samples have dimension " + std::to_string(samples.rows()) +
                                           ", statistics have " + std::to_string(stats.sum.size()));
  }
  if (static_cast<std::size_t>(samples.cols()) != labels.size()) {
    throw Error(ErrorCode::kArgument, "sample and label counts differ");
  }
  if (samples.cols() == 0) return;
  stats.n += static_cast<std::uint64_t>(samples.cols());
  stats.sum += samples.rowwise().sum();
  const Eigen::MatrixXd outer = samples * samples.transpose();
  stats.outer_sum += 0.5 * (outer + outer.transpose());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    auto& cls = stats.per_class[labels[static_cast<std::size_t>(j)]];
    if (cls.sum.size() == 0) cls.sum = Eigen::VectorXd::Zero(samples.rows());
    ++cls.count;
    cls.sum += samples.col(j);
  }
}

StreamStats merge_stats(const StreamStats& a, const StreamStats& b) {
  if (a.n == 0 && a.sum.size() == 0) return b;
  if (b.n == 0 && b.sum.size() == 0) return a;
  if (a.sum.size() != b.sum.size()) throw Error(ErrorCode::kDimension, "cannot merge statistics of different dimension");
  StreamStats out = a;
  out.n += b.n;
  out.sum += b.sum;
  out.outer_sum += b.outer_sum;
  for (const auto& [c, cls] : b.per_class) {
    auto& dst = out.per_class[c];
    if (dst.sum.size() == 0) dst.sum = Eigen::VectorXd::Zero(out.sum.size());
    dst.count += cls.count;
    dst.sum += cls.sum;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PCA

namespace {

void fix_sign(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v(idx) < 0.0) v = -v;
}

}  // namespace

PcaModel pca_fit(const StreamStats& stats, std::size_t k) {
  const std::size_t d = stats.dim();
  if (k == 0 || k > d) {
    throw Error(ErrorCode::kConfig, "PCA needs 1 <= k <= d (k=" + std::to_string(k) +
                                        ", d=" + std::to_string(d) + ")");
  }
  if (stats.n < 2) throw Error(ErrorCode::kData, "PCA needs at least two samples");

  PcaModel model;
  model.mean = stats.mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(stats.covariance());
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kNumerical, "PCA eigen-solver failed");
  // Eigen returns ascending order.
  const auto ki = static_cast<Eigen::Index>(k);
  const auto di = static_cast<Eigen::Index>(d);
  model.components.resize(ki, di);
  model.eigenvalues.resize(ki);
  for (Eigen::Index i = 0; i < ki; ++i) {
    const Eigen::Index src = di - 1 - i;
    model.components.row(i) = solver.eigenvectors().col(src).transpose();
    fix_sign(model.components.row(i));
    model.eigenvalues(i) = std::max(0.0, solver.eigenvalues()(src));
  }
  return model;
}

Eigen::VectorXd pca_apply(const PcaModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.mean.size()) {
    throw Error(ErrorCode::kDimension, "PCA input has dimension " + std::to_string(z.size()) +
                                           ", model expects " + std::to_string(model.mean.size()));
  }
  return model.components * (z - model.mean);
}

// ---------------------------------------------------------------------------
// LDA

Eigen::MatrixXd within_class_scatter(const StreamStats& stats) {
  Eigen::MatrixXd sw = stats.outer_sum;
  for (const auto& [c, cls] : stats.per_class) {
    if (cls.count == 0) continue;
    sw -= (cls.sum * cls.sum.transpose()) / static_cast<double>(cls.count);
  }
  return 0.5 * (sw + sw.transpose());
}

Eigen::MatrixXd between_class_scatter(const StreamStats& stats) {
  const Eigen::VectorXd mu = stats.mean();
  const auto d = static_cast<Eigen::Index>(stats.dim());
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [c, cls] : stats.per_class) {
    if (cls.count == 0) continue;
    const Eigen::VectorXd diff = cls.sum / static_cast<double>(cls.count) - mu;
    sb += static_cast<double>(cls.count) * diff * diff.transpose();
  }
  return sb;
}

double default_lda_ridge(const StreamStats& stats) {
  const double d = static_cast<double>(stats.dim());
  return 1e-4 * within_class_scatter(stats).trace() / d;
}

LdaModel lda_fit(const StreamStats& stats, std::optional<double> ridge) {
  std::size_t num_classes = 0;
  for (const auto& [c, cls] : stats.per_class) {
    if (cls.count > 0) ++num_classes;
  }
  if (num_classes < 2) throw Error(ErrorCode::kData, "LDA needs at least two classes");
  const double eps = ridge.value_or(default_lda_ridge(stats));
  if (eps < 0.0) throw Error(ErrorCode::kConfig, "LDA ridge must be non-negative");

  const auto d = static_cast<Eigen::Index>(stats.dim());
  const Eigen::MatrixXd sw = within_class_scatter(stats) + eps * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd sb = between_class_scatter(stats);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sw_eig(sw, Eigen::EigenvaluesOnly);
  const double scale = std::max(sw.trace() / static_cast<double>(d), 1e-300);
  if (sw_eig.eigenvalues()(0) <= 1e-12 * scale) {
    throw Error(ErrorCode::kNumerical,
                "within-class scatter is singular; use a positive ridge (e.g. the default)");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(sw);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "Cholesky factorisation of the within-class scatter failed");
  }
  // M = L^{-1} S_B L^{-T} is symmetric with the same spectrum as S_W^{-1} S_B.
  const Eigen::MatrixXd l_inv_sb = llt.matrixL().solve(sb);
  Eigen::MatrixXd m = llt.matrixL().solve(l_inv_sb.transpose());
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kNumerical, "LDA eigen-solver failed");

  const double top = solver.eigenvalues()(d - 1);
  if (!(top > 0.0)) throw Error(ErrorCode::kNumerical, "between-class scatter is zero");
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (solver.eigenvalues()(i) > 1e-10 * top) ++rank;
  }
  const Eigen::Index r = std::min<Eigen::Index>(static_cast<Eigen::Index>(num_classes) - 1, rank);

  LdaModel model;
  model.mean = stats.mean();
  model.ridge = eps;
  model.directions.resize(r, d);
  model.eigenvalues.resize(r);
  const double whiten = std::sqrt(static_cast<double>(stats.n));
  for (Eigen::Index i = 0; i < r; ++i) {
    const Eigen::Index src = d - 1 - i;
    // w = L^{-T} u satisfies w^T (S_W + eps I) w = 1.
    const Eigen::VectorXd w = llt.matrixU().solve(solver.eigenvectors().col(src));
    model.directions.row(i) = whiten * w.transpose();
    fix_sign(model.directions.row(i));
    model.eigenvalues(i) = solver.eigenvalues()(src);
  }
  return model;
}

Eigen::VectorXd lda_apply(const LdaModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.mean.size()) {
    throw Error(ErrorCode::kDimension, "LDA input has dimension " + std::to_string(z.size()) +
                                           ", model expects " + std::to_string(model.mean.size()));
  }
  return model.directions * (z - model.mean);
}

}  // namespace frozencil
