// SPDX-License-Identifier: Apache-2.0

#include "gwseg/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "gwseg/prototypes.hpp"

namespace gwseg {

std::vector<EncodedBlock> encode_clouds(std::span<const PointCloud> clouds,
                                        const Hyperparameters& hyper, std::uint64_t seed,
                                        std::span<const FeatureProvider> providers) {
  if (!providers.empty() && providers.size() != clouds.size()) {
    throw InvariantError("need one feature provider per cloud");
  }
  const FeatureProvider handcrafted = handcrafted_provider(hyper.features);
  std::vector<EncodedBlock> out;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    auto blocks = sample_cloud(clouds[c], hyper.sampling, derive_seed(seed, c));
    const std::size_t first = out.size();
    out.resize(first + blocks.size());
    const FeatureProvider& provider = providers.empty() ? handcrafted : providers[c];
    parallel_for(blocks.size(), [&](std::size_t b) {
      out[first + b].features = provider(blocks[b]);
      out[first + b].block = std::move(blocks[b]);
    });
  }
  return out;
}

Vocabulary build_base_vocabulary(std::span<const EncodedBlock> blocks,
                                 const ClassRegistry& registry, int words,
                                 const KMeansConfig& config, std::size_t max_descriptors) {
  std::vector<std::pair<std::size_t, Eigen::Index>> rows;
  Eigen::Index dim = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& labels = blocks[b].block.labels;
    dim = blocks[b].features.low.dim();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!registry.is_novel(labels[i]) && registry.contains(labels[i])) {
        rows.emplace_back(b, static_cast<Eigen::Index>(i));
      }
    }
  }
  if (rows.size() > max_descriptors) {
    std::mt19937_64 rng(derive_seed(config.seed, 0x564F43ULL));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(max_descriptors);
    std::sort(rows.begin(), rows.end());
  }
  FeatureMatrix features;
  features.values.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    features.values.row(static_cast<Eigen::Index>(r)) =
        blocks[rows[r].first].features.low.values.row(rows[r].second);
  }
  features.normalized = true;
  return build_vocabulary(features, words, config);
}

std::vector<TrainingBlock> make_training_blocks(std::span<const EncodedBlock> blocks,
                                                const ModelBundle& bundle) {
  const auto& base = bundle.registry.base_classes;
  std::vector<int> slot_of;
  for (std::size_t s = 0; s < base.size(); ++s) {
    if (static_cast<std::size_t>(base[s]) >= slot_of.size()) slot_of.resize(base[s] + 1, -1);
    slot_of[base[s]] = static_cast<int>(s);
  }
  const bool geo = bundle.hyper.use_geometric_representation;
  std::vector<TrainingBlock> out(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t b) {
    const BlockFeatures& f = blocks[b].features;
    TrainingBlock& tb = out[b];
    const Eigen::Index n = f.semantic.rows();
    const Eigen::Index geo_cols = geo ? bundle.vocab.size() : 0;
    tb.inputs.resize(n, geo_cols + f.semantic.dim());
    if (geo) tb.inputs.leftCols(geo_cols) = soft_assign_all(f.low, bundle.vocab, bundle.hyper.tau);
    tb.inputs.rightCols(f.semantic.dim()) = f.semantic.values;
    tb.targets.resize(static_cast<std::size_t>(n), -1);
    const auto& labels = blocks[b].block.labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const ClassId c = labels[i];
      if (c >= 0 && static_cast<std::size_t>(c) < slot_of.size()) tb.targets[i] = slot_of[c];
    }
  });
  return out;
}

void train_bundle(ModelBundle& bundle, std::span<const EncodedBlock> blocks,
                  const TrainingConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (blocks.empty()) throw InvariantError("no training blocks");
  const auto training = make_training_blocks(blocks, bundle);
  const int geo_dim = bundle.hyper.use_geometric_representation ? bundle.vocab.size() : 0;
  const int sem_dim = static_cast<int>(blocks.front().features.semantic.dim());
  const auto& base = bundle.registry.base_classes;
  TrainingConfig cfg = config;
  cfg.tau = bundle.hyper.tau;
  TrainedHead head = train_base(training, static_cast<int>(base.size()), geo_dim, sem_dim, cfg, on_epoch);

  bundle.fusion = std::move(head.weights);
  bundle.classes.clear();

  std::vector<std::vector<int>> words(base.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto assigned = hard_assign_all(blocks[b].features.low, bundle.vocab);
    for (std::size_t i = 0; i < assigned.size(); ++i) {
      const int slot = training[b].targets[i];
      if (slot >= 0) words[slot].push_back(assigned[i]);
    }
  }
  for (std::size_t s = 0; s < base.size(); ++s) {
    ClassPrototypes cp;
    cp.semantic.class_id = base[s];
    cp.semantic.weight = head.prototypes.row(static_cast<Eigen::Index>(s)).transpose();
    cp.geometric = build_geometric_prototype(base[s], words[s], bundle.vocab.size());
    cp.pruned = prune_minor_frequencies(cp.geometric, bundle.hyper.alpha);
    bundle.classes.emplace(base[s], std::move(cp));
  }
}

void register_support(ModelBundle& bundle, const SupportSet& support,
                      const FeatureProvider& features) {
  for (const auto& [cls, shots] : support.classes) {
    if (!bundle.registry.is_novel(cls)) {
      throw InvariantError("support set class " + std::to_string(cls) + " is not a novel class");
    }
  }
  auto novel = register_novel_classes(support, bundle.vocab, bundle.fusion, features,
                                      bundle.hyper.tau, bundle.hyper.alpha);
  for (auto& [cls, cp] : novel) bundle.classes[cls] = std::move(cp);
}

EvalReport evaluate_scenes(const ModelBundle& bundle, std::span<const PointCloud> clouds,
                           std::uint64_t seed, std::span<const FeatureProvider> providers) {
  const int n = static_cast<int>(bundle.registry.class_count());
  ConfusionMatrix total = ConfusionMatrix::Zero(n, n);
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    if (!clouds[c].has_labels()) throw InvariantError("evaluation clouds must be labeled");
    const auto pred = segment_scene(clouds[c], bundle, derive_seed(seed, c),
                                    providers.empty() ? FeatureProvider{} : providers[c]);
    total += confusion_matrix(pred, *clouds[c].labels, n);
  }
  return miou_report(total, bundle.registry);
}

}  // namespace gwseg
