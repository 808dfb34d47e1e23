#include "frozencil/transform.hpp"

#include "frozencil/error.hpp"

namespace frozencil {

std::string SpaceId::to_string() const {
  std::string name;
  switch (kind) {
    case SpaceKind::kIdentity: name = "identity"; break;
    case SpaceKind::kRandomProjection: name = "random_projection"; break;
    case SpaceKind::kPca: name = "pca"; break;
    case SpaceKind::kLda: name = "lda"; break;
    case SpaceKind::kHyperbolic: name = "hyperbolic"; break;
  }
  return normalized ? name + "+norm" : name;
}

FeatureTransform FeatureTransform::identity(bool normalize) { return {std::monostate{}, normalize}; }

FeatureTransform FeatureTransform::random_projection(RandomProj proj, bool normalize) {
  return {std::move(proj), normalize};
}

FeatureTransform FeatureTransform::pca(PcaModel model, bool normalize) {
  return {std::move(model), normalize};
}

FeatureTransform FeatureTransform::lda(LdaModel model, bool normalize) {
  return {std::move(model), normalize};
}

FeatureTransform FeatureTransform::hyperbolic(HypProjParams params) {
  // The projection normalises internally; keep the flag for the space id only.
  const bool norm = params.normalize_input;
  return {std::move(params), norm};
}

SpaceId FeatureTransform::space() const {
  SpaceId id;
  id.normalized = normalize_;
  id.kind = static_cast<SpaceKind>(projection_.index());
  return id;
}

double FeatureTransform::curvature() const {
  if (const auto* h = std::get_if<HypProjParams>(&projection_)) return h->curvature;
  return 0.0;
}

Eigen::VectorXd FeatureTransform::pre(const Eigen::VectorXd& z) const {
  // Hyperbolic params normalise inside hyp_project.
  if (normalize_ && !is_hyperbolic()) return l2_normalize(z);
  return z;
}

Eigen::VectorXd FeatureTransform::project(const Eigen::VectorXd& pre_z) const {
  struct Visitor {
    const Eigen::VectorXd& z;
    Eigen::VectorXd operator()(const std::monostate&) const { return z; }
    Eigen::VectorXd operator()(const RandomProj& p) const { return apply_random_projection(p, z); }
    Eigen::VectorXd operator()(const PcaModel& m) const { return pca_apply(m, z); }
    Eigen::VectorXd operator()(const LdaModel& m) const { return lda_apply(m, z); }
    Eigen::VectorXd operator()(const HypProjParams& h) const { return hyp_project(h, z).x; }
  };
  return std::visit(Visitor{pre_z}, projection_);
}

double FeatureTransform::distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimension, "distance between vectors of different length");
  if (const auto* h = std::get_if<HypProjParams>(&projection_)) {
    return poincare_distance(BallPoint{a, h->curvature}, BallPoint{b, h->curvature});
  }
  return (a - b).norm();
}

}  // namespace frozencil
