#pragma once

// Nearest-mean classification over an incrementally grown memory bank of
// per-class prototypes. Only per-class aggregates are stored, never samples.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "frozencil/dataio.hpp"
#include "frozencil/transform.hpp"

namespace frozencil {

struct PrototypeEntry {
  ClassId label = 0;
  /// Mean in the transform's output space (tangent-space mean for hyperbolic).
  Eigen::VectorXd prototype;
  std::uint64_t count = 0;
  /// Mean of the raw embeddings.
  Eigen::VectorXd raw_mean;
  /// Mean after the normalisation step (equals raw_mean for unnormalised spaces);
  /// affine spaces re-project prototypes from it when their model is refit.
  Eigen::VectorXd pre_mean;
};

class PrototypeBank {
 public:
  PrototypeBank() = default;
  explicit PrototypeBank(SpaceId space) : space_(space) {}

  const SpaceId& space() const { return space_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  /// Prototype dimension, 0 when empty.
  std::size_t dim() const;
  const std::map<ClassId, PrototypeEntry>& entries() const { return entries_; }
  bool contains(ClassId c) const { return entries_.count(c) != 0; }

  /// Inserts new classes. Throws Error(kConflict) on a class already present,
  /// Error(kDimension) on a prototype dimension mismatch. Existing entries are
  /// untouched.
  void add(std::span<const PrototypeEntry> entries);

  /// Recomputes every prototype as transform.project(pre_mean). Only valid for
  /// affine spaces; throws Error(kConfig) otherwise or on a space mismatch.
  void reproject(const FeatureTransform& transform);

  /// Fingerprint of the stored aggregates of `classes`. Derived prototypes of
  /// affine spaces are excluded because they follow the shared projection.
  std::uint64_t hash(std::span<const ClassId> classes) const;

 private:
  SpaceId space_;
  std::map<ClassId, PrototypeEntry> entries_;
};

/// Per-class prototypes of a view, ascending by class. The transform is applied
/// to each sample before averaging. Throws Error(kData) for an empty view.
std::vector<PrototypeEntry> fit_prototypes(const DatasetView& view, const FeatureTransform& transform);

/// Copy of `bank` with `entries` added; throws Error(kConfig) if `space` differs.
PrototypeBank add_task(const PrototypeBank& bank, std::span<const PrototypeEntry> entries,
                       const SpaceId& space);

/// argmin_c distance(transform(z), prototype_c); ties go to the lowest class.
/// Throws Error(kState) for an empty bank, Error(kConfig) on a space mismatch.
ClassId nmc_predict(const PrototypeBank& bank, const FeatureTransform& transform,
                    const Eigen::VectorXd& z);

}  // namespace frozencil
