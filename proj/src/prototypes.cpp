// SPDX-License-Identifier: Apache-2.0

#include "gwseg/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gwseg {

void GeometricPrototype::validate() const {
  if (histogram.size() < 1) throw InvariantError("empty geometric prototype");
  if ((histogram.array() < 0.0).any() || !histogram.allFinite()) {
    throw InvariantError("geometric prototype of class " + std::to_string(class_id) +
                         " has a negative or non-finite entry");
  }
  const double sum = histogram.sum();
  if (!(std::abs(sum - 1.0) <= 1e-6)) {
    std::ostringstream msg;
    msg << "geometric prototype of class " << class_id << " sums to " << sum << ", expected 1";
    throw InvariantError(msg.str());
  }
}

GeometricPrototype build_geometric_prototype(ClassId class_id, std::span<const int> assignments,
                                             int word_count) {
  if (assignments.empty()) {
    throw InvariantError("class " + std::to_string(class_id) + " has no points for its prototype");
  }
  GeometricPrototype proto;
  proto.class_id = class_id;
  proto.histogram = Vector::Zero(word_count);
  for (int w : assignments) {
    if (w < 0 || w >= word_count) throw InvariantError("word assignment out of range");
    proto.histogram[w] += 1.0;
  }
  proto.histogram /= static_cast<double>(assignments.size());
  return proto;
}

GeometricPrototype prune_minor_frequencies(const GeometricPrototype& proto, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvariantError("frequency limit alpha must lie in (0, 1]");
  }
  proto.validate();
  if (proto.pruned && proto.alpha == alpha) return proto;

  const Vector& p = proto.histogram;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return p[a] > p[b]; });

  GeometricPrototype out = proto;
  out.pruned = true;
  out.alpha = alpha;
  out.histogram.setZero();
  double gamma = 0.0;
  std::size_t i = 0;
  while (gamma < alpha && i < order.size()) {
    out.histogram[order[i]] = p[order[i]];
    gamma += p[order[i]];
    ++i;
  }
  bool dropped = false;
  for (; i < order.size(); ++i) dropped = dropped || p[order[i]] > 0.0;
  if (dropped) {
    out.histogram /= gamma;
  } else {
    out.histogram = p;
  }
  return out;
}

BlockEncoding encode_block(const BlockFeatures& features, const Vocabulary& vocab,
                           const FusionWeights& weights, double tau) {
  BlockEncoding enc;
  enc.words = hard_assign_all(features.low, vocab);
  if (weights.geo_dim > 0) {
    if (weights.geo_dim != vocab.size()) {
      throw InvariantError("fusion head expects " + std::to_string(weights.geo_dim) +
                           " geometric inputs but the vocabulary has " +
                           std::to_string(vocab.size()) + " words");
    }
    enc.fused = fuse_all(soft_assign_all(features.low, vocab, tau), features.semantic.values, weights);
  } else {
    enc.fused = fuse_all(Matrix(features.semantic.rows(), 0), features.semantic.values, weights);
  }
  return enc;
}

std::map<ClassId, ClassPrototypes> register_novel_classes(const SupportSet& support,
                                                          const Vocabulary& vocab,
                                                          const FusionWeights& weights,
                                                          const FeatureProvider& features,
                                                          double tau, double alpha) {
  if (!weights.trained) throw InvariantError("novel registration needs a trained fusion head");
  std::map<ClassId, ClassPrototypes> out;
  for (const auto& [cls, shots] : support.classes) {
    Vector fused_sum = Vector::Zero(weights.fused_dim());
    std::vector<int> words;
    for (const SupportBlock& sb : shots) {
      const BlockEncoding enc = encode_block(features(sb.block), vocab, weights, tau);
      for (std::size_t i = 0; i < sb.mask.size(); ++i) {
        if (!sb.mask[i]) continue;
        fused_sum += enc.fused.row(static_cast<Eigen::Index>(i)).transpose();
        words.push_back(enc.words[i]);
      }
    }
    if (words.empty()) {
      throw InvariantError("novel class " + std::to_string(cls) + " has no foreground points");
    }
    ClassPrototypes cp;
    cp.semantic.class_id = cls;
    const double n = fused_sum.norm();
    if (!(n > 0.0)) {
      throw InvariantError("novel class " + std::to_string(cls) + " has a zero mean fused feature");
    }
    cp.semantic.weight = fused_sum / n;
    cp.geometric = build_geometric_prototype(cls, words, vocab.size());
    cp.pruned = prune_minor_frequencies(cp.geometric, alpha);
    out.emplace(cls, std::move(cp));
  }
  return out;
}

}  // namespace gwseg
