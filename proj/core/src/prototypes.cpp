#include "frozencil/prototypes.hpp"

#include <limits>

#include "frozencil/error.hpp"
#include "hash.hpp"

namespace frozencil {

std::size_t PrototypeBank::dim() const {
  if (entries_.empty()) return 0;
  return static_cast<std::size_t>(entries_.begin()->second.prototype.size());
}

void PrototypeBank::add(std::span<const PrototypeEntry> entries) {
  for (const auto& e : entries) {
    if (contains(e.label)) {
      throw Error(ErrorCode::kConflict, "class " + std::to_string(e.label) + " is already in the bank");
    }
    if (e.count == 0) throw Error(ErrorCode::kData, "prototype with zero count");
  }
  std::size_t d = dim();
  for (const auto& e : entries) {
    const auto ed = static_cast<std::size_t>(e.prototype.size());
    if (d != 0 && ed != d) {
      throw Error(ErrorCode::kDimension, "prototype dimension " + std::to_string(ed) +
                                             " differs from bank dimension " + std::to_string(d));
    }
    d = ed;
  }
  std::map<ClassId, PrototypeEntry> staged;
  for (const auto& e : entries) {
    if (!staged.emplace(e.label, e).second) {
      throw Error(ErrorCode::kConflict, "class " + std::to_string(e.label) + " given twice");
    }
  }
  entries_.merge(staged);
}

void PrototypeBank::reproject(const FeatureTransform& transform) {
  if (!transform.is_affine()) throw Error(ErrorCode::kConfig, "only affine spaces can be re-projected");
  if (!(transform.space() == space_)) {
    throw Error(ErrorCode::kConfig, "transform space " + transform.space().to_string() +
                                        " does not match bank space " + space_.to_string());
  }
  for (auto& [c, e] : entries_) e.prototype = transform.project(e.pre_mean);
}

std::uint64_t PrototypeBank::hash(std::span<const ClassId> classes) const {
  const bool affine = space_.kind == SpaceKind::kPca || space_.kind == SpaceKind::kLda;
  detail::Fnv1a h;
  for (ClassId c : classes) {
    h.add(c);
    const auto it = entries_.find(c);
    if (it == entries_.end()) {
      h.add(std::uint8_t{0});
      continue;
    }
    const auto& e = it->second;
    h.add(e.count);
    h.add(e.raw_mean);
    h.add(e.pre_mean);
    if (!affine) h.add(e.prototype);
  }
  return h.value();
}

std::vector<PrototypeEntry> fit_prototypes(const DatasetView& view, const FeatureTransform& transform) {
  if (view.empty()) throw Error(ErrorCode::kData, "cannot fit prototypes on an empty view");

  struct Acc {
    std::uint64_t count = 0;
    Eigen::VectorXd raw;
    Eigen::VectorXd pre;
    Eigen::VectorXd out;
    std::vector<BallPoint> ball;
  };
  std::map<ClassId, Acc> acc;
  const bool hyperbolic = transform.is_hyperbolic();
  const bool affine = transform.is_affine();
  for (std::size_t i = 0; i < view.size(); ++i) {
    const auto& rec = view[i];
    const Eigen::VectorXd z = rec.z();
    const Eigen::VectorXd pre = transform.pre(z);
    auto& a = acc[rec.label];
    if (a.count == 0) {
      a.raw = Eigen::VectorXd::Zero(z.size());
      a.pre = Eigen::VectorXd::Zero(pre.size());
    }
    ++a.count;
    a.raw += z;
    a.pre += pre;
    if (hyperbolic) {
      a.ball.push_back(BallPoint{transform.project(pre), transform.curvature()});
    } else if (!affine) {
      const Eigen::VectorXd out = transform.project(pre);
      if (a.out.size() == 0) a.out = Eigen::VectorXd::Zero(out.size());
      a.out += out;
    }
  }

  std::vector<PrototypeEntry> entries;
  entries.reserve(acc.size());
  for (auto& [label, a] : acc) {
    PrototypeEntry e;
    e.label = label;
    e.count = a.count;
    const double n = static_cast<double>(a.count);
    e.raw_mean = a.raw / n;
    e.pre_mean = a.pre / n;
    if (hyperbolic) {
      e.prototype = hyp_prototype(a.ball).x;
    } else if (affine) {
      // Mean of affine images equals the image of the mean.
      e.prototype = transform.project(e.pre_mean);
    } else {
      e.prototype = a.out / n;
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

PrototypeBank add_task(const PrototypeBank& bank, std::span<const PrototypeEntry> entries,
                       const SpaceId& space) {
  if (!(space == bank.space())) {
    throw Error(ErrorCode::kConfig, "entries fitted in space " + space.to_string() +
                                        " cannot join a bank in space " + bank.space().to_string());
  }
  PrototypeBank out = bank;
  out.add(entries);
  return out;
}

ClassId nmc_predict(const PrototypeBank& bank, const FeatureTransform& transform,
                    const Eigen::VectorXd& z) {
  if (bank.empty()) throw Error(ErrorCode::kState, "prototype bank is empty");
  if (!(transform.space() == bank.space())) {
    throw Error(ErrorCode::kConfig, "transform space " + transform.space().to_string() +
                                        " does not match bank space " + bank.space().to_string());
  }
  const Eigen::VectorXd q = transform.apply(z);
  ClassId best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  // std::map iterates in ascending class order, so strict < keeps the lowest on ties.
  for (const auto& [c, e] : bank.entries()) {
    const double dist = transform.distance(q, e.prototype);
    if (dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  return best;
}

}  // namespace frozencil
