// SPDX-License-Identifier: Apache-2.0
//
// Geometric-guided classifier re-weighting. A class whose pruned geometric
// prototype contains a point's hard word gets its cosine logit multiplied
// by beta; the point takes the class with the largest re-weighted logit.

#ifndef GWSEG_CLASSIFIER_HPP
#define GWSEG_CLASSIFIER_HPP

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "gwseg/blocks.hpp"
#include "gwseg/features.hpp"
#include "gwseg/fusion.hpp"
#include "gwseg/prototypes.hpp"
#include "gwseg/vocabulary.hpp"

namespace gwseg {

enum class FeatureSource { Handcrafted, Ingested };

struct Hyperparameters {
  double tau = 10.0;
  double beta = 1.2;
  double alpha = 0.9;
  int words = 32;
  bool use_geometric_representation = true;
  FeatureSource feature_source = FeatureSource::Handcrafted;
  HandcraftedConfig features;
  SamplingConfig sampling;

  /// tau > 0, alpha in (0,1], beta >= 1, words >= 2, m >= 1, block size > 0.
  void validate() const;

  bool operator==(const Hyperparameters& o) const;
};

struct ModelBundle {
  Vocabulary vocab;
  FusionWeights fusion;
  ClassRegistry registry;
  std::map<ClassId, ClassPrototypes> classes;
  Hyperparameters hyper;

  /// Dimensions agree, every prototype is unit / normalized, and (when
  /// `require_all_classes`) every registry class has prototypes.
  void validate(bool require_all_classes) const;
};

/// Rounds every payload to float precision, as persisted on disk.
void round_to_storage_precision(ModelBundle& bundle);

/// 1 iff the pruned histogram is positive at the assigned word.
int matching_score(const GeometricPrototype& pruned, int word);

/// beta where matched, 1 elsewhere.
std::vector<double> class_weights(std::span<const int> scores, double beta);

/// Column of the largest logit after multiplying matched classes by beta;
/// ties go to the lowest column.
std::size_t reweighted_argmax(std::span<const double> logits, std::span<const int> scores,
                              double beta);

/// Row-wise softmax(tau * logits).
Matrix class_probabilities(const Matrix& logits, double tau);

struct BlockPrediction {
  std::vector<ClassId> labels;
  std::vector<ClassId> class_order;  // column order of `logits`
  Matrix logits;                     // re-weighted cosine logits, n x C
};

/// Predicts from precomputed features; ties go to the lowest class id.
BlockPrediction classify_features(const BlockFeatures& features, const ModelBundle& bundle);

/// Computes handcrafted features for the block and classifies them.
BlockPrediction classify_points(const SampledBlock& block, const ModelBundle& bundle);

/// Argmax of the semantic cosine logits with no geometric re-weighting.
std::vector<ClassId> classify_semantic_only(const BlockFeatures& features, const ModelBundle& bundle);

/// Block-wise inference over a whole cloud. Unsampled points take the
/// label of their nearest sampled point in the same block.
std::vector<ClassId> segment_scene(const PointCloud& cloud, const ModelBundle& bundle,
                                   std::uint64_t seed, const FeatureProvider& features = {});

}  // namespace gwseg

#endif  // GWSEG_CLASSIFIER_HPP
