#pragma once

// Euclidean feature transforms for prototype classifiers: l2 normalisation,
// seeded random projection, and PCA / LDA fitted from streaming sufficient
// statistics so that no raw samples need to be retained across tasks.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "frozencil/dataio.hpp"

namespace frozencil {

/// z / ||z||. Throws Error(kDegenerate) for a zero vector.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& z);

struct RandomProj {
  /// m x d, entries ~ N(0, 1/m).
  Eigen::MatrixXd weights;
  std::uint64_t seed = 0;
  bool relu = true;

  std::size_t input_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

RandomProj init_random_projection(std::size_t input_dim, std::size_t output_dim,
                                  std::uint64_t seed, bool relu = true);
Eigen::VectorXd apply_random_projection(const RandomProj& proj, const Eigen::VectorXd& z);

struct ClassSums {
  std::uint64_t count = 0;
  Eigen::VectorXd sum;
};

/// Additive first/second-moment accumulators, overall and per class.
struct StreamStats {
  std::uint64_t n = 0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd outer_sum;
  std::map<ClassId, ClassSums> per_class;

  std::size_t dim() const { return static_cast<std::size_t>(sum.size()); }
  Eigen::VectorXd mean() const;
  /// Population covariance outer_sum / n - mean mean^T.
  Eigen::MatrixXd covariance() const;
};

StreamStats make_stream_stats(std::size_t dim);
/// Columns of `samples` are added with the matching labels. Throws
/// Error(kDimension) if the row count disagrees with the stats dimension.
void update_stats(StreamStats& stats, const Eigen::MatrixXd& samples,
                  std::span<const ClassId> labels);
/// Element-wise sum of two accumulators.
StreamStats merge_stats(const StreamStats& a, const StreamStats& b);

struct PcaModel {
  Eigen::VectorXd mean;
  /// k x d, orthonormal rows, ordered by descending eigenvalue.
  Eigen::MatrixXd components;
  Eigen::VectorXd eigenvalues;

  std::size_t output_dim() const { return static_cast<std::size_t>(components.rows()); }
};

/// Top-k eigenvectors of the covariance; each sign-fixed so its largest-magnitude
/// coordinate is positive.
PcaModel pca_fit(const StreamStats& stats, std::size_t k);
Eigen::VectorXd pca_apply(const PcaModel& model, const Eigen::VectorXd& z);

struct LdaModel {
  Eigen::VectorXd mean;
  /// r x d, r <= C - 1. Rows are scaled so the projected within-class
  /// covariance (S_W + ridge I) / n is the identity.
  Eigen::MatrixXd directions;
  Eigen::VectorXd eigenvalues;
  double ridge = 0.0;

  std::size_t output_dim() const { return static_cast<std::size_t>(directions.rows()); }
};

/// Default ridge: 1e-4 * trace(S_W) / d.
double default_lda_ridge(const StreamStats& stats);

/// Solves (S_W + ridge I)^{-1} S_B via a Cholesky-whitened symmetric problem.
/// `ridge` = nullopt selects default_lda_ridge. Throws Error(kData) for fewer
/// than two classes and Error(kNumerical) when S_W + ridge I is not positive definite.
LdaModel lda_fit(const StreamStats& stats, std::optional<double> ridge = std::nullopt);
Eigen::VectorXd lda_apply(const LdaModel& model, const Eigen::VectorXd& z);

/// Within-class scatter S_W = outer_sum - sum_c n_c mu_c mu_c^T.
Eigen::MatrixXd within_class_scatter(const StreamStats& stats);
/// Between-class scatter S_B = sum_c n_c (mu_c - mu)(mu_c - mu)^T.
Eigen::MatrixXd between_class_scatter(const StreamStats& stats);

}  // namespace frozencil
