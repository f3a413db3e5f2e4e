// SPDX-License-Identifier: Apache-2.0

#include "gwseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <span>

namespace gwseg {

void FusionWeights::validate() const {
  if (geo_dim < 0 || sem_dim < 0 || input_dim() < 1) {
    throw InvariantError("fusion head needs a positive input dimension");
  }
  if (weight.cols() != input_dim()) {
    throw InvariantError("fusion weight has " + std::to_string(weight.cols()) +
                         " input columns, expected " + std::to_string(input_dim()));
  }
  if (bias.size() != weight.rows() || weight.rows() < 1) {
    throw InvariantError("fusion bias length does not match the fused dimension");
  }
  if (!weight.allFinite() || !bias.allFinite()) throw InvariantError("fusion weights not finite");
}

FusionWeights init_fusion_weights(int geo_dim, int sem_dim, int fused_dim, std::uint64_t seed) {
  FusionWeights w;
  w.geo_dim = geo_dim;
  w.sem_dim = sem_dim;
  if (fused_dim < 1 || w.input_dim() < 1) throw InvariantError("invalid fusion dimensions");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / w.input_dim()));
  w.weight.resize(fused_dim, w.input_dim());
  for (Eigen::Index i = 0; i < w.weight.size(); ++i) w.weight.data()[i] = normal(rng);
  w.bias = Vector::Zero(fused_dim);
  return w;
}

Vector fuse(const Eigen::Ref<const Vector>& f_geo, const Eigen::Ref<const Vector>& f_sem,
            const FusionWeights& weights) {
  if (f_geo.size() != weights.geo_dim || f_sem.size() != weights.sem_dim) {
    throw InvariantError("fuse: got " + std::to_string(f_geo.size()) + "+" +
                         std::to_string(f_sem.size()) + " inputs, head expects " +
                         std::to_string(weights.geo_dim) + "+" + std::to_string(weights.sem_dim));
  }
  Vector x(weights.input_dim());
  x << f_geo, f_sem;
  return (weights.weight * x + weights.bias).cwiseMax(0.0);
}

Matrix fuse_all(const Matrix& geo, const Matrix& sem, const FusionWeights& weights) {
  if (geo.cols() != weights.geo_dim || sem.cols() != weights.sem_dim ||
      (weights.geo_dim > 0 && geo.rows() != sem.rows())) {
    throw InvariantError("fuse_all: input dimensions do not match the fusion head");
  }
  Matrix z = sem * weights.weight.rightCols(weights.sem_dim).transpose();
  if (weights.geo_dim > 0) z.noalias() += geo * weights.weight.leftCols(weights.geo_dim).transpose();
  z.rowwise() += weights.bias.transpose();
  return z.cwiseMax(0.0);
}

double semantic_logit(const Eigen::Ref<const Vector>& f_fin, const SemanticPrototype& proto) {
  if (f_fin.size() != proto.weight.size()) {
    throw InvariantError("semantic_logit: dimension mismatch");
  }
  const double denom = f_fin.norm() * proto.weight.norm();
  return denom > 0.0 ? f_fin.dot(proto.weight) / denom : 0.0;
}

namespace {

// Rows scaled to unit length; zero rows stay zero. Returns the norms.
Vector normalize_rows_into(const Matrix& m, Matrix& out) {
  Vector norms = m.rowwise().norm();
  out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (norms[i] > 0.0) out.row(i) /= norms[i];
  }
  return norms;
}

Matrix affine_relu_pre(const Matrix& x, const FusionWeights& w) {
  Matrix z = x * w.weight.transpose();
  z.rowwise() += w.bias.transpose();
  return z;
}

}  // namespace

Matrix cosine_logits(const Matrix& fused, const Matrix& prototypes) {
  Matrix fh, ph;
  normalize_rows_into(fused, fh);
  normalize_rows_into(prototypes, ph);
  return fh * ph.transpose();
}

LossResult episode_loss(const FusionWeights& weights, const Matrix& prototypes,
                        const Episode& episode, double tau, Gradients* grads) {
  const Eigen::Index classes = prototypes.rows();
  const Matrix& xq = episode.query_inputs;

  const Matrix zq = affine_relu_pre(xq, weights);
  const Matrix fq = zq.cwiseMax(0.0);

  // Assemble prototypes: fake slots take the support mean.
  Matrix assembled = prototypes;
  Matrix zs, fs;
  std::vector<double> support_count(static_cast<std::size_t>(classes), 0.0);
  std::vector<char> is_fake(static_cast<std::size_t>(classes), 0);
  for (int c : episode.fake_slots) is_fake.at(static_cast<std::size_t>(c)) = 1;
  if (!episode.fake_slots.empty()) {
    zs = affine_relu_pre(episode.support_inputs, weights);
    fs = zs.cwiseMax(0.0);
    for (int c : episode.fake_slots) assembled.row(c).setZero();
    for (Eigen::Index i = 0; i < fs.rows(); ++i) {
      const int t = episode.support_targets[i];
      if (t >= 0 && is_fake[t]) {
        assembled.row(t) += fs.row(i);
        support_count[t] += 1.0;
      }
    }
    for (int c : episode.fake_slots) {
      if (support_count[c] == 0.0) throw InvariantError("fake class slot without support points");
      assembled.row(c) /= support_count[c];
    }
  }

  Matrix fh, ah;
  const Vector qn = normalize_rows_into(fq, fh);
  const Vector an = normalize_rows_into(assembled, ah);
  const Matrix cos = fh * ah.transpose();

  LossResult result;
  Matrix g = Matrix::Zero(cos.rows(), classes);  // dL/dcos
  for (Eigen::Index i = 0; i < cos.rows(); ++i) {
    const int y = episode.query_targets[i];
    if (y < 0) continue;
    const Vector logits = tau * cos.row(i).transpose();
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < classes; ++c) {
      if (logits[c] > logits[best]) best = c;
    }
    const double m = logits[best];
    const Vector e = (logits.array() - m).exp();
    const double z = e.sum();
    result.loss += std::log(z) - (logits[y] - m);
    g.row(i) = e.transpose() / z;
    g(i, y) -= 1.0;
    ++result.points;
    if (best == y) ++result.correct;
  }
  if (result.points == 0) return result;
  const double inv_n = 1.0 / static_cast<double>(result.points);
  result.loss *= inv_n;
  if (!grads) return result;

  g *= tau * inv_n;
  const Matrix gc = g.cwiseProduct(cos);

  // d cos(f, a) / d f = (a_hat - cos f_hat) / |f|, and symmetrically for a.
  Matrix dfq = g * ah;
  const Vector s = gc.rowwise().sum();
  for (Eigen::Index i = 0; i < dfq.rows(); ++i) {
    if (qn[i] > 0.0) {
      dfq.row(i) = (dfq.row(i) - s[i] * fh.row(i)) / qn[i];
    } else {
      dfq.row(i).setZero();
    }
  }
  Matrix da = g.transpose() * fh;
  const Vector t = gc.colwise().sum().transpose();
  for (Eigen::Index c = 0; c < classes; ++c) {
    if (an[c] > 0.0) {
      da.row(c) = (da.row(c) - t[c] * ah.row(c)) / an[c];
    } else {
      da.row(c).setZero();
    }
  }

  const Matrix dzq = dfq.cwiseProduct((zq.array() > 0.0).cast<double>().matrix());
  grads->weight = dzq.transpose() * xq;
  grads->bias = dzq.colwise().sum().transpose();
  grads->prototypes = da;

  if (!episode.fake_slots.empty()) {
    Matrix dfs = Matrix::Zero(fs.rows(), fs.cols());
    for (Eigen::Index i = 0; i < fs.rows(); ++i) {
      const int tgt = episode.support_targets[i];
      if (tgt >= 0 && is_fake[tgt]) dfs.row(i) = da.row(tgt) / support_count[tgt];
    }
    const Matrix dzs = dfs.cwiseProduct((zs.array() > 0.0).cast<double>().matrix());
    grads->weight.noalias() += dzs.transpose() * episode.support_inputs;
    grads->bias += dzs.colwise().sum().transpose();
    for (int c : episode.fake_slots) grads->prototypes.row(c).setZero();
  }
  return result;
}

void TrainingConfig::validate(int class_count) const {
  if (epochs < 0 || batch_size < 1 || learning_rate < 0.0 || lr_step < 1 || !(lr_decay > 0.0) ||
      !(tau > 0.0) || fake_novel < 0 || fused_dim < 1) {
    throw InvariantError("invalid training configuration");
  }
  if (class_count < 2) throw InvariantError("training needs at least 2 base classes");
  if (fake_novel >= class_count) {
    throw InvariantError("fake-novel count " + std::to_string(fake_novel) +
                         " must be below the base class count " + std::to_string(class_count));
  }
}

namespace {

Matrix stack_inputs(const std::vector<TrainingBlock>& blocks, std::span<const std::size_t> which,
                    std::vector<int>& targets, Eigen::Index cols) {
  Eigen::Index rows = 0;
  for (std::size_t b : which) rows += blocks[b].inputs.rows();
  Matrix out(rows, cols);
  targets.clear();
  targets.reserve(static_cast<std::size_t>(rows));
  Eigen::Index at = 0;
  for (std::size_t b : which) {
    out.middleRows(at, blocks[b].inputs.rows()) = blocks[b].inputs;
    at += blocks[b].inputs.rows();
    targets.insert(targets.end(), blocks[b].targets.begin(), blocks[b].targets.end());
  }
  return out;
}

Matrix initial_prototypes(const std::vector<TrainingBlock>& blocks, const FusionWeights& w,
                          int class_count, std::mt19937_64& rng) {
  Matrix sums = Matrix::Zero(class_count, w.fused_dim());
  for (const auto& b : blocks) {
    const Matrix f = affine_relu_pre(b.inputs, w).cwiseMax(0.0);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      if (b.targets[i] >= 0) sums.row(b.targets[i]) += f.row(i);
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < sums.rows(); ++c) {
    double n = sums.row(c).norm();
    if (!(n > 0.0)) {
      for (Eigen::Index j = 0; j < sums.cols(); ++j) sums(c, j) = normal(rng);
      n = sums.row(c).norm();
    }
    sums.row(c) /= n;
  }
  return sums;
}

}  // namespace

TrainedHead train_base(const std::vector<TrainingBlock>& blocks, int class_count, int geo_dim,
                       int sem_dim, const TrainingConfig& config,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate(class_count);
  const int input_dim = geo_dim + sem_dim;
  std::vector<std::size_t> seen(static_cast<std::size_t>(class_count), 0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].inputs.cols() != input_dim ||
        static_cast<std::size_t>(blocks[b].inputs.rows()) != blocks[b].targets.size()) {
      throw InvariantError("training block " + std::to_string(b) + " has inconsistent shape");
    }
    for (int t : blocks[b].targets) {
      if (t >= class_count) throw InvariantError("training target outside the class range");
      if (t >= 0) ++seen[t];
    }
  }
  for (int c = 0; c < class_count; ++c) {
    if (seen[c] == 0) {
      throw InvariantError("base class slot " + std::to_string(c) + " never appears in training data");
    }
  }

  std::mt19937_64 rng(config.seed);
  TrainedHead head;
  head.weights = init_fusion_weights(geo_dim, sem_dim, config.fused_dim, derive_seed(config.seed, 1));
  head.prototypes = initial_prototypes(blocks, head.weights, class_count, rng);

  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::size_t batch_id = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate * std::pow(config.lr_decay, epoch / config.lr_step);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t points = 0, correct = 0;

    for (std::size_t start = 0; start < order.size(); start += bs, ++batch_id) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(bs, order.size() - start));
      Episode ep;
      std::size_t n_support = 0;
      if (config.fake_novel > 0 && batch.size() >= 2) n_support = batch.size() / 2;
      if (n_support > 0) {
        ep.support_inputs = stack_inputs(blocks, batch.first(n_support), ep.support_targets, input_dim);
        std::set<int> present;
        for (int t : ep.support_targets) {
          if (t >= 0) present.insert(t);
        }
        std::vector<int> candidates(present.begin(), present.end());
        std::shuffle(candidates.begin(), candidates.end(), rng);
        const auto fake = std::min<std::size_t>(static_cast<std::size_t>(config.fake_novel), candidates.size());
        ep.fake_slots.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(fake));
        std::sort(ep.fake_slots.begin(), ep.fake_slots.end());
      }
      ep.query_inputs = stack_inputs(blocks, batch.subspan(n_support), ep.query_targets, input_dim);

      Gradients g;
      const LossResult r = episode_loss(head.weights, head.prototypes, ep, config.tau, &g);
      if (!std::isfinite(r.loss)) {
        throw Error("non-finite training loss at batch " + std::to_string(batch_id));
      }
      loss_sum += r.loss * static_cast<double>(r.points);
      points += r.points;
      correct += r.correct;
      if (r.points == 0 || lr == 0.0) continue;

      head.weights.weight -= lr * g.weight;
      head.weights.bias -= lr * g.bias;
      head.prototypes -= lr * g.prototypes;
      for (Eigen::Index c = 0; c < head.prototypes.rows(); ++c) {
        head.prototypes.row(c).normalize();
      }
    }

    EpochLog entry{epoch, points ? loss_sum / static_cast<double>(points) : 0.0,
                   points ? static_cast<double>(correct) / static_cast<double>(points) : 0.0};
    head.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  head.weights.trained = true;
  return head;
}

double gradient_check(const FusionWeights& weights, const Matrix& prototypes,
                      const Episode& episode, double tau, double epsilon) {
  Gradients analytic;
  episode_loss(weights, prototypes, episode, tau, &analytic);

  double worst = 0.0;
  auto compare = [&](double a, double numeric) {
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  };

  FusionWeights w = weights;
  Matrix p = prototypes;
  auto loss = [&] { return episode_loss(w, p, episode, tau, nullptr).loss; };
  auto central = [&](double& param) {
    const double saved = param;
    param = saved + epsilon;
    const double up = loss();
    param = saved - epsilon;
    const double down = loss();
    param = saved;
    return (up - down) / (2.0 * epsilon);
  };

  for (Eigen::Index i = 0; i < w.weight.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.weight.cols(); ++j) {
      compare(analytic.weight(i, j), central(w.weight(i, j)));
    }
  }
  for (Eigen::Index i = 0; i < w.bias.size(); ++i) compare(analytic.bias[i], central(w.bias[i]));
  std::vector<char> fake(static_cast<std::size_t>(p.rows()), 0);
  for (int c : episode.fake_slots) fake[c] = 1;
  for (Eigen::Index c = 0; c < p.rows(); ++c) {
    if (fake[c]) continue;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      compare(analytic.prototypes(c, j), central(p(c, j)));
    }
  }
  return worst;
}

}  // namespace gwseg
