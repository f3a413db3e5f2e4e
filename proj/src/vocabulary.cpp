// SPDX-License-Identifier: Apache-2.0

#include "gwseg/vocabulary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace gwseg {

namespace {

struct Assignment {
  std::vector<int> index;
  std::vector<double> cosine;
  double objective = 0.0;
};

Assignment assign_all(const Matrix& x, const Matrix& centroids) {
  const Matrix sims = x * centroids.transpose();
  Assignment a;
  a.index.resize(static_cast<std::size_t>(x.rows()));
  a.cosine.resize(a.index.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    double best_cos = sims(i, 0);
    for (Eigen::Index h = 1; h < sims.cols(); ++h) {
      if (sims(i, h) > best_cos) {
        best_cos = sims(i, h);
        best = h;
      }
    }
    a.index[i] = static_cast<int>(best);
    a.cosine[i] = best_cos;
    a.objective += 1.0 - best_cos;
  }
  return a;
}

// Greedy k-means++: each step draws 2 + ln(k) candidates with probability
// proportional to 1 - cos (half the squared chord distance) and keeps the
// one that lowers the total potential most.
Matrix seed_plus_plus(const Matrix& x, int word_count, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Matrix centroids(word_count, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = x.row(first(rng));
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(word_count)));

  // best cosine of every point to the chosen centroids so far
  Vector best = x * centroids.row(0).transpose();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int h = 1; h < word_count; ++h) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += std::max(0.0, 1.0 - best[i]);
    if (!(total > 0.0)) {
      throw InvariantError("fewer distinct descriptors than the requested " +
                           std::to_string(word_count) + " words");
    }
    Eigen::Index chosen = -1;
    double chosen_potential = 0.0;
    Vector chosen_best;
    for (int t = 0; t < trials; ++t) {
      double target = unit(rng) * total;
      Eigen::Index pick = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = std::max(0.0, 1.0 - best[i]);
        if (w <= 0.0) continue;
        pick = i;
        if (target < w) break;
        target -= w;
      }
      Vector candidate = best.cwiseMax(x * x.row(pick).transpose());
      double potential = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) potential += std::max(0.0, 1.0 - candidate[i]);
      if (chosen < 0 || potential < chosen_potential) {
        chosen = pick;
        chosen_potential = potential;
        chosen_best = std::move(candidate);
      }
    }
    centroids.row(h) = x.row(chosen);
    best = std::move(chosen_best);
  }
  return centroids;
}

}  // namespace

void Vocabulary::validate() const {
  if (words.rows() < 2) throw InvariantError("vocabulary needs at least 2 words");
  for (Eigen::Index h = 0; h < words.rows(); ++h) {
    const double n = words.row(h).norm();
    if (!(std::abs(n - 1.0) <= 1e-6)) {
      std::ostringstream msg;
      msg << "vocabulary word " << h << " has norm " << n << ", expected 1";
      throw InvariantError(msg.str());
    }
  }
  const Matrix gram = words * words.transpose();
  for (Eigen::Index a = 0; a < gram.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < gram.cols(); ++b) {
      if (gram(a, b) >= 1.0 - 1e-9) {
        throw InvariantError("vocabulary words " + std::to_string(a) + " and " +
                             std::to_string(b) + " are duplicates");
      }
    }
  }
}

Vocabulary build_vocabulary(const FeatureMatrix& features, int word_count,
                            const KMeansConfig& config) {
  if (word_count < 1) throw InvariantError("word count must be >= 1");
  if (word_count > features.rows()) {
    throw InvariantError("word count " + std::to_string(word_count) + " exceeds the " +
                         std::to_string(features.rows()) + " available descriptors");
  }
  if (!features.normalized) throw InvariantError("vocabulary input must be L2-normalized");
  require_normalized(features, "vocabulary input");

  const Matrix& x = features.values;
  std::mt19937_64 rng(config.seed);
  Matrix centroids = seed_plus_plus(x, word_count, rng);

  Vocabulary vocab;
  vocab.build_config = config;
  Assignment a = assign_all(x, centroids);
  vocab.objective_trace.push_back(a.objective);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    Matrix sums = Matrix::Zero(word_count, x.cols());
    std::vector<std::size_t> counts(word_count, 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      sums.row(a.index[i]) += x.row(i);
      ++counts[a.index[i]];
    }

    // Worst-fitting points, used to revive empty or cancelled clusters.
    std::vector<Eigen::Index> worst(static_cast<std::size_t>(x.rows()));
    std::iota(worst.begin(), worst.end(), 0);
    std::stable_sort(worst.begin(), worst.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return a.cosine[l] < a.cosine[r]; });
    std::size_t next_worst = 0;

    Matrix updated = centroids;
    for (int h = 0; h < word_count; ++h) {
      const double norm = sums.row(h).norm();
      if (counts[h] > 0 && norm > 0.0) {
        updated.row(h) = sums.row(h) / norm;
        continue;
      }
      while (next_worst < worst.size() && counts[a.index[worst[next_worst]]] < 2) ++next_worst;
      if (next_worst == worst.size()) break;
      const Eigen::Index donor = worst[next_worst++];
      --counts[a.index[donor]];
      updated.row(h) = x.row(donor);
    }

    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    a = assign_all(x, centroids);
    vocab.objective_trace.push_back(a.objective);
    if (shift < config.tolerance) break;
  }

  vocab.words = std::move(centroids);
  vocab.member_counts.assign(word_count, 0);
  for (int idx : a.index) ++vocab.member_counts[idx];
  if (word_count >= 2) vocab.validate();
  return vocab;
}

Vector word_similarities(const Eigen::Ref<const Vector>& descriptor, const Vocabulary& vocab) {
  if (descriptor.size() != vocab.descriptor_dim()) {
    throw InvariantError("descriptor dimension " + std::to_string(descriptor.size()) +
                         " does not match vocabulary dimension " +
                         std::to_string(vocab.descriptor_dim()));
  }
  return vocab.words * descriptor;
}

Vector soft_assign(const Eigen::Ref<const Vector>& descriptor, const Vocabulary& vocab, double tau) {
  if (!(tau > 0.0)) throw InvariantError("temperature must be > 0");
  Vector logits = tau * word_similarities(descriptor, vocab);
  logits.array() -= logits.maxCoeff();
  Vector p = logits.array().exp();
  return p / p.sum();
}

int hard_assign(const Eigen::Ref<const Vector>& descriptor, const Vocabulary& vocab) {
  const Vector sims = word_similarities(descriptor, vocab);
  Eigen::Index best = 0;
  for (Eigen::Index h = 1; h < sims.size(); ++h) {
    if (sims[h] > sims[best]) best = h;
  }
  return static_cast<int>(best);
}

Matrix soft_assign_all(const FeatureMatrix& features, const Vocabulary& vocab, double tau) {
  if (!(tau > 0.0)) throw InvariantError("temperature must be > 0");
  if (features.dim() != vocab.descriptor_dim()) {
    throw InvariantError("descriptor dimension does not match vocabulary");
  }
  Matrix logits = tau * (features.values * vocab.words.transpose());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return logits;
}

std::vector<int> hard_assign_all(const FeatureMatrix& features, const Vocabulary& vocab) {
  if (features.dim() != vocab.descriptor_dim()) {
    throw InvariantError("descriptor dimension does not match vocabulary");
  }
  return assign_all(features.values, vocab.words).index;
}

std::vector<std::uint8_t> activation_mask(const FeatureMatrix& features, const Vocabulary& vocab,
                                          int word) {
  if (word < 0 || word >= vocab.size()) {
    throw InvariantError("word index " + std::to_string(word) + " outside [0, " +
                         std::to_string(vocab.size()) + ")");
  }
  const auto idx = hard_assign_all(features, vocab);
  std::vector<std::uint8_t> mask(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) mask[i] = idx[i] == word ? 1 : 0;
  return mask;
}

}  // namespace gwseg
