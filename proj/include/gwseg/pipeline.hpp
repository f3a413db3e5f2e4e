// SPDX-License-Identifier: Apache-2.0
//
// End-to-end stages shared by the CLI and the benchmark: vocabulary
// building, base training, novel registration and scene evaluation.

#ifndef GWSEG_PIPELINE_HPP
#define GWSEG_PIPELINE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gwseg/blocks.hpp"
#include "gwseg/classifier.hpp"
#include "gwseg/evaluation.hpp"
#include "gwseg/features.hpp"
#include "gwseg/fusion.hpp"
#include "gwseg/vocabulary.hpp"

namespace gwseg {

struct EncodedBlock {
  SampledBlock block;
  BlockFeatures features;
};

/// Samples every block of every cloud and computes its features. `providers`
/// is either empty (handcrafted features from `hyper`) or one per cloud.
std::vector<EncodedBlock> encode_clouds(std::span<const PointCloud> clouds,
                                        const Hyperparameters& hyper, std::uint64_t seed,
                                        std::span<const FeatureProvider> providers = {});

/// K-means over the low-level descriptors of base-class points. At most
/// max_descriptors points are used (a seeded subset when there are more).
Vocabulary build_base_vocabulary(std::span<const EncodedBlock> blocks,
                                 const ClassRegistry& registry, int words,
                                 const KMeansConfig& config, std::size_t max_descriptors);

/// Head inputs for training: soft word assignment (when the bundle uses
/// the geometric representation) followed by the semantic descriptor.
/// Points of classes outside the base set are excluded from the loss.
std::vector<TrainingBlock> make_training_blocks(std::span<const EncodedBlock> blocks,
                                                const ModelBundle& bundle);

/// Trains the head and base semantic prototypes, then builds base geometric
/// prototypes from every base-class training point.
void train_bundle(ModelBundle& bundle, std::span<const EncodedBlock> blocks,
                  const TrainingConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Adds novel-class prototypes; base-class entries are left untouched.
void register_support(ModelBundle& bundle, const SupportSet& support,
                      const FeatureProvider& features);

/// Segments each cloud and accumulates one confusion matrix.
EvalReport evaluate_scenes(const ModelBundle& bundle, std::span<const PointCloud> clouds,
                           std::uint64_t seed, std::span<const FeatureProvider> providers = {});

}  // namespace gwseg

#endif  // GWSEG_PIPELINE_HPP
