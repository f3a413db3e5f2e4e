// SPDX-License-Identifier: Apache-2.0
//
// Geometric words: spherical K-means centroids over low-level descriptors,
// with soft (softmax over scaled cosine) and hard (argmax) assignment.

#ifndef GWSEG_VOCABULARY_HPP
#define GWSEG_VOCABULARY_HPP

#include <cstdint>
#include <vector>

#include "gwseg/common.hpp"
#include "gwseg/features.hpp"

namespace gwseg {

struct KMeansConfig {
  std::uint64_t seed = 0;
  int max_iterations = 100;
  double tolerance = 1e-5;  // stop once no centroid moves farther than this
};

struct Vocabulary {
  Matrix words;  // H x d1, unit rows
  KMeansConfig build_config;
  std::vector<std::size_t> member_counts;  // points per word at the final assignment
  /// Sum of (1 - cos) to the assigned word after each assignment step.
  std::vector<double> objective_trace;

  int size() const { return static_cast<int>(words.rows()); }
  int descriptor_dim() const { return static_cast<int>(words.cols()); }

  /// Unit rows, H >= 2 and pairwise cosine below 1 - 1e-9.
  void validate() const;
};

/// Spherical K-means with greedy k-means++ seeding. Empty clusters are reseeded at
/// the worst-fitting point.
Vocabulary build_vocabulary(const FeatureMatrix& features, int word_count,
                            const KMeansConfig& config = {});

/// Cosine similarity of a unit descriptor to every word.
Vector word_similarities(const Eigen::Ref<const Vector>& descriptor, const Vocabulary& vocab);

/// softmax(tau * cos(f, g_h)) over the H words.
Vector soft_assign(const Eigen::Ref<const Vector>& descriptor, const Vocabulary& vocab, double tau);

/// Index of the most similar word; ties go to the lowest index.
int hard_assign(const Eigen::Ref<const Vector>& descriptor, const Vocabulary& vocab);

/// Row-wise versions over a normalized feature matrix.
Matrix soft_assign_all(const FeatureMatrix& features, const Vocabulary& vocab, double tau);
std::vector<int> hard_assign_all(const FeatureMatrix& features, const Vocabulary& vocab);

/// 1 where a point's hard assignment is `word`.
std::vector<std::uint8_t> activation_mask(const FeatureMatrix& features, const Vocabulary& vocab,
                                          int word);

}  // namespace gwseg

#endif  // GWSEG_VOCABULARY_HPP
