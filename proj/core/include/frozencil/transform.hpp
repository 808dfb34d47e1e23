#pragma once

// Feature spaces in which class prototypes live. A transform is an optional l2
// normalisation followed by at most one projection.

#include <string>
#include <variant>

#include <Eigen/Core>

#include "frozencil/hyperbolic.hpp"
#include "frozencil/projections.hpp"

namespace frozencil {

enum class SpaceKind : std::uint8_t {
  kIdentity = 0,
  kRandomProjection = 1,
  kPca = 2,
  kLda = 3,
  kHyperbolic = 4,
};

struct SpaceId {
  SpaceKind kind = SpaceKind::kIdentity;
  bool normalized = false;

  /// e.g. "identity", "identity+norm", "pca+norm".
  std::string to_string() const;
  friend bool operator==(const SpaceId&, const SpaceId&) = default;
};

class FeatureTransform {
 public:
  using Projection = std::variant<std::monostate, RandomProj, PcaModel, LdaModel, HypProjParams>;

  static FeatureTransform identity(bool normalize = false);
  static FeatureTransform random_projection(RandomProj proj, bool normalize = false);
  static FeatureTransform pca(PcaModel model, bool normalize = false);
  static FeatureTransform lda(LdaModel model, bool normalize = false);
  /// Normalisation is taken from HypProjParams::normalize_input.
  static FeatureTransform hyperbolic(HypProjParams params);

  SpaceId space() const;
  bool is_hyperbolic() const { return std::holds_alternative<HypProjParams>(projection_); }
  /// PCA and LDA are affine in the pre-normalised input, so a class mean can be
  /// projected directly.
  bool is_affine() const {
    return std::holds_alternative<PcaModel>(projection_) ||
           std::holds_alternative<LdaModel>(projection_);
  }
  double curvature() const;

  /// Normalisation step only (identity when the space is not normalised).
  Eigen::VectorXd pre(const Eigen::VectorXd& z) const;
  /// Projection step applied to an already pre-processed vector.
  Eigen::VectorXd project(const Eigen::VectorXd& pre_z) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& z) const { return project(pre(z)); }

  /// Euclidean distance, or Poincare distance for the hyperbolic space.
  double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  const Projection& projection() const { return projection_; }
  bool normalizes() const { return normalize_; }

 private:
  FeatureTransform(Projection p, bool normalize) : projection_(std::move(p)), normalize_(normalize) {}
  Projection projection_;
  bool normalize_ = false;
};

}  // namespace frozencil
