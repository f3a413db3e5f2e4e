// SPDX-License-Identifier: Apache-2.0
//
// Fusion head and base-class prototype training.
//
// The head maps the concatenation of a point's soft word assignment and
// its semantic descriptor through one shared affine layer and a rectifier:
//
//   f_fin = max(0, W [f_geo ; f_sem] + b)
//
// Classes are scored by the cosine between f_fin and a unit prototype,
// scaled by a temperature inside a softmax cross-entropy. Gradients are
// derived by hand (see episode_loss) and validated by gradient_check.

#ifndef GWSEG_FUSION_HPP
#define GWSEG_FUSION_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "gwseg/common.hpp"

namespace gwseg {

struct FusionWeights {
  Matrix weight;  // d3 x (geo_dim + sem_dim)
  Vector bias;    // d3
  int geo_dim = 0;
  int sem_dim = 0;
  bool trained = false;

  int fused_dim() const { return static_cast<int>(weight.rows()); }
  int input_dim() const { return geo_dim + sem_dim; }
  void validate() const;

  bool operator==(const FusionWeights& o) const {
    return geo_dim == o.geo_dim && sem_dim == o.sem_dim && trained == o.trained &&
           weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           weight == o.weight && bias.size() == o.bias.size() && bias == o.bias;
  }
};

/// He-initialized weights and zero bias.
FusionWeights init_fusion_weights(int geo_dim, int sem_dim, int fused_dim, std::uint64_t seed);

Vector fuse(const Eigen::Ref<const Vector>& f_geo, const Eigen::Ref<const Vector>& f_sem,
            const FusionWeights& weights);

/// Row-wise fuse; `geo` may have zero columns when the head has geo_dim 0.
Matrix fuse_all(const Matrix& geo, const Matrix& sem, const FusionWeights& weights);

struct SemanticPrototype {
  ClassId class_id = 0;
  Vector weight;  // unit norm

  bool operator==(const SemanticPrototype& o) const {
    return class_id == o.class_id && weight.size() == o.weight.size() && weight == o.weight;
  }
};

/// Cosine similarity; 0 when either vector is zero.
double semantic_logit(const Eigen::Ref<const Vector>& f_fin, const SemanticPrototype& proto);

/// n x C cosine similarities between fused rows and prototype rows.
Matrix cosine_logits(const Matrix& fused, const Matrix& prototypes);

/// Pre-concatenated head inputs of one block. targets[i] is the prototype
/// slot of point i, or -1 to leave the point out of the loss.
struct TrainingBlock {
  Matrix inputs;
  std::vector<int> targets;
};

/// One optimization step's data. Query points are scored against the
/// assembled prototypes: learned rows, except for `fake_slots`, whose rows
/// are the normalized mean fused feature of support points with that target.
struct Episode {
  Matrix query_inputs;
  std::vector<int> query_targets;
  Matrix support_inputs;
  std::vector<int> support_targets;
  std::vector<int> fake_slots;
};

struct Gradients {
  Matrix weight;
  Vector bias;
  Matrix prototypes;  // rows of fake slots are zero
};

struct LossResult {
  double loss = 0.0;
  std::size_t points = 0;
  std::size_t correct = 0;
};

/// Mean softmax cross-entropy over tau-scaled cosine logits. Fills `grads`
/// with the exact gradient when non-null.
LossResult episode_loss(const FusionWeights& weights, const Matrix& prototypes,
                        const Episode& episode, double tau, Gradients* grads);

struct TrainingConfig {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 0.01;
  int lr_step = 20;         // epochs between decays
  double lr_decay = 0.5;
  double tau = 10.0;
  int fake_novel = 2;
  int fused_dim = 128;
  std::uint64_t seed = 0;

  void validate(int class_count) const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainedHead {
  FusionWeights weights;
  Matrix prototypes;  // class_count x d3, unit rows, ordered by slot
  std::vector<EpochLog> log;
};

/// Stochastic gradient descent over shuffled batches of blocks. When
/// fake_novel > 0, each batch's first half is a support split and up to
/// fake_novel of the classes it contains are scored with support-mean
/// prototypes on the second half.
TrainedHead train_base(const std::vector<TrainingBlock>& blocks, int class_count, int geo_dim,
                       int sem_dim, const TrainingConfig& config,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

/// Max over W, b and learned prototype rows of
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6), with numeric
/// gradients from central differences of step epsilon.
double gradient_check(const FusionWeights& weights, const Matrix& prototypes,
                      const Episode& episode, double tau, double epsilon);

}  // namespace gwseg

#endif  // GWSEG_FUSION_HPP
