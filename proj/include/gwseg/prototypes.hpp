// SPDX-License-Identifier: Apache-2.0
//
// Geometric prototypes: per-class frequency histograms of hard word
// assignments, minor-frequency pruning, and novel-class registration from
// support sets.

#ifndef GWSEG_PROTOTYPES_HPP
#define GWSEG_PROTOTYPES_HPP

#include <map>
#include <span>
#include <vector>

#include "gwseg/blocks.hpp"
#include "gwseg/features.hpp"
#include "gwseg/fusion.hpp"
#include "gwseg/vocabulary.hpp"

namespace gwseg {

struct GeometricPrototype {
  ClassId class_id = 0;
  Vector histogram;  // H entries, >= 0, sum 1
  bool pruned = false;
  double alpha = 1.0;  // frequency limit used when pruned

  /// Nonnegative entries summing to 1 within 1e-6.
  void validate() const;

  bool operator==(const GeometricPrototype& o) const {
    return class_id == o.class_id && pruned == o.pruned && alpha == o.alpha &&
           histogram.size() == o.histogram.size() && histogram == o.histogram;
  }
};

/// histogram[h] = (#assignments equal to h) / #assignments.
GeometricPrototype build_geometric_prototype(ClassId class_id, std::span<const int> assignments,
                                             int word_count);

/// Keeps the largest entries (ties by lower index) while the accumulated
/// frequency is below alpha, so the entry that reaches alpha is kept. The
/// rest are zeroed and the kept mass is rescaled to 1. A histogram where no
/// nonzero entry is dropped comes back unchanged, and so does a prototype
/// already pruned at the same alpha.
GeometricPrototype prune_minor_frequencies(const GeometricPrototype& proto, double alpha);

/// Both prototype kinds of one class.
struct ClassPrototypes {
  SemanticPrototype semantic;
  GeometricPrototype geometric;  // unpruned
  GeometricPrototype pruned;
};

/// Foreground statistics pooled over a set of points.
struct ForegroundPool {
  Vector fused_sum;
  std::vector<int> words;
};

/// Fused features and hard word assignments of a block under a head.
struct BlockEncoding {
  Matrix fused;            // n x d3
  std::vector<int> words;  // hard assignment per point
};

BlockEncoding encode_block(const BlockFeatures& features, const Vocabulary& vocab,
                           const FusionWeights& weights, double tau);

/// Per novel class: semantic prototype = normalized mean fused feature of
/// all foreground points across its shots; geometric prototype = word
/// histogram of the same points, then pruned with alpha.
std::map<ClassId, ClassPrototypes> register_novel_classes(const SupportSet& support,
                                                          const Vocabulary& vocab,
                                                          const FusionWeights& weights,
                                                          const FeatureProvider& features,
                                                          double tau, double alpha);

}  // namespace gwseg

#endif  // GWSEG_PROTOTYPES_HPP
