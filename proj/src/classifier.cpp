// SPDX-License-Identifier: Apache-2.0

#include "gwseg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gwseg {

void Hyperparameters::validate() const {
  if (!(tau > 0.0)) throw InvariantError("tau must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvariantError("alpha must lie in (0, 1]");
  if (!(beta >= 1.0)) throw InvariantError("beta must be >= 1");
  if (words < 2) throw InvariantError("the vocabulary needs at least 2 words");
  if (sampling.points_per_block < 1) throw InvariantError("points per block must be >= 1");
  if (!(sampling.block_size > 0.0)) throw InvariantError("block size must be > 0");
  if (features.low_neighbors < 3) throw InvariantError("low-level neighbor count must be >= 3");
  for (std::size_t k : features.semantic_neighbors) {
    if (k < 3) throw InvariantError("semantic neighbor counts must be >= 3");
  }
}

bool Hyperparameters::operator==(const Hyperparameters& o) const {
  return tau == o.tau && beta == o.beta && alpha == o.alpha && words == o.words &&
         use_geometric_representation == o.use_geometric_representation &&
         feature_source == o.feature_source &&
         features.low_neighbors == o.features.low_neighbors &&
         features.semantic_neighbors == o.features.semantic_neighbors &&
         sampling.block_size == o.sampling.block_size &&
         sampling.points_per_block == o.sampling.points_per_block;
}

void ModelBundle::validate(bool require_all_classes) const {
  hyper.validate();
  registry.validate();
  vocab.validate();
  if (vocab.size() != hyper.words) {
    throw InvariantError("vocabulary has " + std::to_string(vocab.size()) + " words but H is " +
                         std::to_string(hyper.words));
  }
  if (fusion.weight.size() > 0) {
    fusion.validate();
    const int expected_geo = hyper.use_geometric_representation ? vocab.size() : 0;
    if (fusion.geo_dim != expected_geo) {
      throw InvariantError("fusion head geometric input " + std::to_string(fusion.geo_dim) +
                           " does not match " + std::to_string(expected_geo));
    }
  }
  for (const auto& [cls, cp] : classes) {
    if (!registry.contains(cls)) {
      throw InvariantError("prototype for unregistered class " + std::to_string(cls));
    }
    if (cp.semantic.class_id != cls || cp.geometric.class_id != cls || cp.pruned.class_id != cls) {
      throw InvariantError("prototype class ids disagree for class " + std::to_string(cls));
    }
    if (cp.semantic.weight.size() != fusion.fused_dim()) {
      throw InvariantError("semantic prototype of class " + std::to_string(cls) +
                           " has dimension " + std::to_string(cp.semantic.weight.size()) +
                           ", expected " + std::to_string(fusion.fused_dim()));
    }
    const double n = cp.semantic.weight.norm();
    if (!(std::abs(n - 1.0) <= 1e-6)) {
      std::ostringstream msg;
      msg << "semantic prototype of class " << cls << " has norm " << n << ", expected unit norm";
      throw InvariantError(msg.str());
    }
    for (const GeometricPrototype* g : {&cp.geometric, &cp.pruned}) {
      if (g->histogram.size() != vocab.size()) {
        throw InvariantError("geometric prototype of class " + std::to_string(cls) +
                             " does not have H entries");
      }
      g->validate();
    }
    if (!cp.pruned.pruned) {
      throw InvariantError("class " + std::to_string(cls) + " lacks a pruned geometric prototype");
    }
    for (Eigen::Index h = 0; h < cp.pruned.histogram.size(); ++h) {
      if (cp.pruned.histogram[h] > 0.0 && cp.geometric.histogram[h] == 0.0) {
        throw InvariantError("pruned prototype of class " + std::to_string(cls) +
                             " has support outside the unpruned prototype");
      }
    }
  }
  if (require_all_classes) {
    for (ClassId c : registry.all_classes()) {
      if (!classes.count(c)) {
        throw InvariantError("missing prototypes for registered class " + registry.name_of(c) +
                             " (" + std::to_string(c) + ")");
      }
    }
  }
}

void round_to_storage_precision(ModelBundle& bundle) {
  round_to_f32(bundle.vocab.words);
  round_to_f32(bundle.fusion.weight);
  round_to_f32(bundle.fusion.bias);
  for (auto& [cls, cp] : bundle.classes) {
    round_to_f32(cp.semantic.weight);
    round_to_f32(cp.geometric.histogram);
    round_to_f32(cp.pruned.histogram);
  }
}

int matching_score(const GeometricPrototype& pruned, int word) {
  if (word < 0 || word >= pruned.histogram.size()) {
    throw InvariantError("word index out of range in matching_score");
  }
  return pruned.histogram[word] > 0.0 ? 1 : 0;
}

std::vector<double> class_weights(std::span<const int> scores, double beta) {
  if (!(beta >= 1.0)) throw InvariantError("beta must be >= 1");
  std::vector<double> w(scores.size());
  for (std::size_t c = 0; c < scores.size(); ++c) w[c] = scores[c] ? beta : 1.0;
  return w;
}

std::size_t reweighted_argmax(std::span<const double> logits, std::span<const int> scores,
                              double beta) {
  if (logits.size() != scores.size() || logits.empty()) {
    throw InvariantError("reweighted_argmax: need one score per logit");
  }
  const auto w = class_weights(scores, beta);
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] * w[c] > logits[best] * w[best]) best = c;
  }
  return best;
}

Matrix class_probabilities(const Matrix& logits, double tau) {
  if (!(tau > 0.0)) throw InvariantError("temperature must be > 0");
  Matrix p = tau * logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    auto row = p.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return p;
}

namespace {

struct PrototypeTable {
  std::vector<ClassId> order;
  Matrix semantic;  // C x d3
  std::vector<const GeometricPrototype*> pruned;
};

PrototypeTable prototype_table(const ModelBundle& bundle) {
  PrototypeTable t;
  t.order = bundle.registry.all_classes();
  if (t.order.empty()) throw InvariantError("bundle has no registered classes");
  t.semantic.resize(static_cast<Eigen::Index>(t.order.size()), bundle.fusion.fused_dim());
  for (std::size_t c = 0; c < t.order.size(); ++c) {
    auto it = bundle.classes.find(t.order[c]);
    if (it == bundle.classes.end()) {
      throw InvariantError("missing prototype for registered class " +
                           bundle.registry.name_of(t.order[c]) + " (" +
                           std::to_string(t.order[c]) + ")");
    }
    t.semantic.row(static_cast<Eigen::Index>(c)) = it->second.semantic.weight.transpose();
    t.pruned.push_back(&it->second.pruned);
  }
  return t;
}

ClassId argmax_class(const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::vector<ClassId>& order) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return order[static_cast<std::size_t>(best)];
}

}  // namespace

BlockPrediction classify_features(const BlockFeatures& features, const ModelBundle& bundle) {
  const PrototypeTable table = prototype_table(bundle);
  const BlockEncoding enc = encode_block(features, bundle.vocab, bundle.fusion, bundle.hyper.tau);

  BlockPrediction out;
  out.class_order = table.order;
  out.logits = cosine_logits(enc.fused, table.semantic);
  out.labels.resize(static_cast<std::size_t>(out.logits.rows()));
  std::vector<int> scores(table.order.size());
  std::vector<double> row(table.order.size());
  for (Eigen::Index i = 0; i < out.logits.rows(); ++i) {
    for (std::size_t c = 0; c < scores.size(); ++c) {
      scores[c] = matching_score(*table.pruned[c], enc.words[i]);
      row[c] = out.logits(i, static_cast<Eigen::Index>(c));
    }
    out.labels[i] = table.order[reweighted_argmax(row, scores, bundle.hyper.beta)];
    const auto w = class_weights(scores, bundle.hyper.beta);
    for (std::size_t c = 0; c < w.size(); ++c) out.logits(i, static_cast<Eigen::Index>(c)) *= w[c];
  }
  return out;
}

BlockPrediction classify_points(const SampledBlock& block, const ModelBundle& bundle) {
  return classify_features(compute_handcrafted_features(block, bundle.hyper.features), bundle);
}

std::vector<ClassId> classify_semantic_only(const BlockFeatures& features, const ModelBundle& bundle) {
  const PrototypeTable table = prototype_table(bundle);
  const BlockEncoding enc = encode_block(features, bundle.vocab, bundle.fusion, bundle.hyper.tau);
  const Matrix logits = cosine_logits(enc.fused, table.semantic);
  std::vector<ClassId> labels(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) labels[i] = argmax_class(logits.row(i), table.order);
  return labels;
}

std::vector<ClassId> segment_scene(const PointCloud& cloud, const ModelBundle& bundle,
                                   std::uint64_t seed, const FeatureProvider& features) {
  if (cloud.empty()) throw InvariantError("cannot segment an empty cloud");
  const FeatureProvider provider = features ? features : handcrafted_provider(bundle.hyper.features);
  const auto groups = partition_blocks(cloud, bundle.hyper.sampling.block_size);
  std::vector<ClassId> labels(cloud.size(), -1);

  parallel_for(groups.size(), [&](std::size_t b) {
    const SampledBlock block =
        sample_block(cloud, groups[b], bundle.hyper.sampling.points_per_block, derive_seed(seed, b));
    const BlockPrediction pred = classify_features(provider(block), bundle);
    // distinct sampled points and their labels
    std::vector<std::size_t> src;
    std::vector<ClassId> src_label;
    std::vector<char> taken(cloud.size(), 0);
    for (std::size_t i = 0; i < block.source_indices.size(); ++i) {
      const std::size_t idx = block.source_indices[i];
      if (taken[idx]) continue;
      taken[idx] = 1;
      src.push_back(idx);
      src_label.push_back(pred.labels[i]);
      labels[idx] = pred.labels[i];
    }
    for (std::size_t idx : groups[b]) {
      if (taken[idx]) continue;
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < src.size(); ++j) {
        const double d = (cloud.positions[idx] - cloud.positions[src[j]]).squaredNorm();
        if (d < best) {
          best = d;
          best_j = j;
        }
      }
      labels[idx] = src_label[best_j];
    }
  });
  return labels;
}

}  // namespace gwseg
