// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "gwseg/fusion.hpp"

using namespace gwseg;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Matrix unit_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

// Smallest |pre-activation| over the episode's query and support rows.
double min_abs_preactivation(const FusionWeights& w, const Episode& ep) {
  auto pre = [&](const Matrix& x) {
    if (x.rows() == 0) return std::numeric_limits<double>::infinity();
    Matrix z = x * w.weight.transpose();
    z.rowwise() += w.bias.transpose();
    return z.cwiseAbs().minCoeff();
  };
  return std::min(pre(ep.query_inputs), pre(ep.support_inputs));
}

struct Problem {
  FusionWeights w;
  Matrix protos;
  Episode ep;
};

// A random batch away from the rectifier kink, so central differences are smooth.
Problem random_problem(std::mt19937_64& rng, bool with_fake) {
  std::uniform_int_distribution<int> cls(0, 3);
  for (;;) {
    Problem p;
    p.w = init_fusion_weights(3, 4, 6, rng());
    p.w.bias = random_matrix(6, 1, rng, 0.3).col(0);
    p.protos = unit_rows(random_matrix(4, 6, rng));
    p.ep.query_inputs = random_matrix(10, 7, rng);
    for (int i = 0; i < 10; ++i) p.ep.query_targets.push_back(i == 3 ? -1 : cls(rng));
    if (with_fake) {
      p.ep.support_inputs = random_matrix(8, 7, rng);
      p.ep.support_targets = {1, 1, 2, 0, 1, 3, -1, 2};
      p.ep.fake_slots = {1, 2};
    }
    if (min_abs_preactivation(p.w, p.ep) > 1e-3) return p;
  }
}

double loss_of(const Problem& p) { return episode_loss(p.w, p.protos, p.ep, 10.0, nullptr).loss; }

}  // namespace

TEST_CASE("fuse basics") {
  FusionWeights zero;
  zero.geo_dim = 2;
  zero.sem_dim = 3;
  zero.weight = Matrix::Zero(4, 5);
  zero.bias = Vector::Zero(4);
  zero.validate();
  CHECK(fuse(Eigen::Vector2d(1, 2), Eigen::Vector3d(3, 4, 5), zero).isZero());

  FusionWeights pick = zero;
  pick.weight = Matrix::Zero(3, 5);
  pick.weight.rightCols(3) = Matrix::Identity(3, 3);
  pick.bias = Vector::Zero(3);
  const Eigen::Vector3d sem(0.2, 0.0, 1.7);
  CHECK(fuse(Eigen::Vector2d(-4, 9), sem, pick) == sem);

  std::mt19937_64 rng(1);
  const FusionWeights w = init_fusion_weights(5, 7, 16, 3);
  const Matrix geo = random_matrix(30, 5, rng), sem2 = random_matrix(30, 7, rng);
  const Matrix a = fuse_all(geo, sem2, w);
  CHECK(a == fuse_all(geo, sem2, w));
  CHECK((a.array() >= 0.0).all());
  for (Eigen::Index i = 0; i < 30; ++i) {
    CHECK((a.row(i).transpose() - fuse(geo.row(i).transpose(), sem2.row(i).transpose(), w)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(fuse(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), zero), InvariantError);
}

TEST_CASE("a head without geometric inputs") {
  std::mt19937_64 rng(2);
  const FusionWeights w = init_fusion_weights(0, 4, 8, 9);
  const Matrix sem = random_matrix(5, 4, rng);
  const Matrix f = fuse_all(Matrix(5, 0), sem, w);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK((f.row(i).transpose() - fuse(Vector(0), sem.row(i).transpose(), w)).norm() < 1e-12);
  }
}

TEST_CASE("semantic logit") {
  SemanticPrototype p{0, Eigen::Vector3d(1, 2, 2) / 3.0};
  CHECK(semantic_logit(Eigen::Vector3d(2, 4, 4), p) == doctest::Approx(1.0));
  CHECK(semantic_logit(Eigen::Vector3d(2, -1, 0), p) == doctest::Approx(0.0));
  CHECK(semantic_logit(-p.weight, p) == doctest::Approx(-1.0));
  CHECK(semantic_logit(Eigen::Vector3d::Zero(), p) == 0.0);
}

TEST_CASE("two identical prototypes give a loss of ln 2") {
  std::mt19937_64 rng(3);
  FusionWeights w = init_fusion_weights(2, 3, 4, 5);
  w.bias.setConstant(0.5);
  Matrix protos(2, 4);
  protos.row(0) = Eigen::RowVector4d(0.5, 0.5, 0.5, 0.5);
  protos.row(1) = protos.row(0);
  Episode ep;
  ep.query_inputs = random_matrix(12, 5, rng);
  for (int i = 0; i < 12; ++i) ep.query_targets.push_back(i % 2);
  const LossResult r = episode_loss(w, protos, ep, 10.0, nullptr);
  CHECK(r.points == 12);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("ignored targets do not contribute") {
  std::mt19937_64 rng(4);
  Problem p = random_problem(rng, false);
  const LossResult full = episode_loss(p.w, p.protos, p.ep, 10.0, nullptr);
  CHECK(full.points == 9);
  p.ep.query_inputs.row(3) *= 100.0;  // the ignored point
  CHECK(episode_loss(p.w, p.protos, p.ep, 10.0, nullptr).loss == full.loss);
}

TEST_CASE("analytic gradients match an independent central-difference oracle") {
  std::mt19937_64 rng(5);
  for (bool fake : {false, true}) {
    for (int trial = 0; trial < 5; ++trial) {
      Problem p = random_problem(rng, fake);
      Gradients g;
      episode_loss(p.w, p.protos, p.ep, 10.0, &g);
      const double eps = 1e-5;
      double worst = 0.0;
      auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = loss_of(p);
        param = saved - eps;
        const double down = loss_of(p);
        param = saved;
        const double numeric = (up - down) / (2 * eps);
        worst = std::max(worst, std::abs(numeric - analytic) /
                                    std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
      };
      for (Eigen::Index i = 0; i < p.w.weight.size(); ++i) probe(p.w.weight.data()[i], g.weight.data()[i]);
      for (Eigen::Index i = 0; i < p.w.bias.size(); ++i) probe(p.w.bias[i], g.bias[i]);
      for (Eigen::Index i = 0; i < p.protos.size(); ++i) probe(p.protos.data()[i], g.prototypes.data()[i]);
      CHECK(worst < 1e-4);
      CHECK(gradient_check(p.w, p.protos, p.ep, 10.0, 1e-5) < 1e-4);
      if (fake) {
        CHECK(g.prototypes.row(1).isZero());
        CHECK(g.prototypes.row(2).isZero());
      }
    }
  }
}

TEST_CASE("finite-difference error shrinks from eps 1e-3 to 1e-5") {
  std::mt19937_64 rng(6);
  const Problem p = random_problem(rng, true);
  const double coarse = gradient_check(p.w, p.protos, p.ep, 10.0, 1e-3);
  const double fine = gradient_check(p.w, p.protos, p.ep, 10.0, 1e-5);
  CHECK(fine < coarse);
}

TEST_CASE("symmetric batch under zero weights has mirrored prototype gradients") {
  FusionWeights w;
  w.geo_dim = 1;
  w.sem_dim = 2;
  w.weight = Matrix::Zero(2, 3);
  w.bias = Eigen::Vector2d(1.0, 1.0);
  Matrix protos(2, 2);
  protos << 1, 0, 0, 1;
  Episode ep;
  ep.query_inputs = Matrix::Ones(4, 3);
  ep.query_targets = {0, 1, 0, 1};
  Gradients g;
  episode_loss(w, protos, ep, 10.0, &g);
  // Swapping the two classes swaps the two fused coordinates.
  CHECK(g.prototypes(0, 0) == doctest::Approx(g.prototypes(1, 1)));
  CHECK(g.prototypes(0, 1) == doctest::Approx(g.prototypes(1, 0)));
  CHECK(g.bias[0] == doctest::Approx(g.bias[1]));
}

namespace {

// Two classes separated by the sign of the first semantic input.
std::vector<TrainingBlock> separable_blocks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<TrainingBlock> blocks(10);
  for (auto& b : blocks) {
    b.inputs.resize(64, 4);
    for (Eigen::Index i = 0; i < 64; ++i) {
      const int y = static_cast<int>(i % 2);
      b.inputs.row(i) << g(rng) * 0.3, (y ? 2.0 : -2.0) + 0.3 * g(rng), g(rng), g(rng);
      b.targets.push_back(y);
    }
  }
  return blocks;
}

}  // namespace

TEST_CASE("training fits a separable problem and is deterministic") {
  const auto blocks = separable_blocks(7);
  TrainingConfig cfg;
  cfg.epochs = 20;  // 10 blocks, batch 1: 200 steps
  cfg.batch_size = 1;
  cfg.fake_novel = 0;
  cfg.fused_dim = 8;
  cfg.learning_rate = 0.05;
  cfg.seed = 11;
  const TrainedHead a = train_base(blocks, 2, 1, 3, cfg);
  CHECK(a.log.back().loss < a.log.front().loss);
  CHECK(a.log.back().accuracy > 0.95);
  for (Eigen::Index c = 0; c < a.prototypes.rows(); ++c) {
    CHECK(a.prototypes.row(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  const TrainedHead b = train_base(blocks, 2, 1, 3, cfg);
  CHECK(a.weights == b.weights);
  CHECK(a.prototypes == b.prototypes);
}

TEST_CASE("fake-novel episodes train and keep prototypes on the sphere") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<TrainingBlock> blocks(12);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].inputs.resize(40, 5);
    for (Eigen::Index i = 0; i < 40; ++i) {
      const int y = static_cast<int>((i + b) % 4);
      blocks[b].inputs.row(i) = random_matrix(1, 5, rng, 0.2);
      blocks[b].inputs(i, y) += 2.0;
      blocks[b].targets.push_back(i % 7 == 0 ? -1 : y);
    }
  }
  TrainingConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 4;
  cfg.fake_novel = 2;
  cfg.fused_dim = 12;
  cfg.learning_rate = 0.05;
  std::vector<EpochLog> seen;
  const TrainedHead h = train_base(blocks, 4, 0, 5, cfg, [&](const EpochLog& e) { seen.push_back(e); });
  CHECK(seen.size() == 15);
  CHECK(h.weights.trained);
  CHECK(h.log.back().loss < h.log.front().loss);
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(h.prototypes.row(c).norm() == doctest::Approx(1.0));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto blocks = separable_blocks(9);
  TrainingConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 2;
  cfg.fused_dim = 8;
  cfg.fake_novel = 1;
  cfg.learning_rate = 0.0;
  cfg.seed = 3;
  TrainingConfig none = cfg;
  none.epochs = 0;
  const TrainedHead moved = train_base(blocks, 2, 1, 3, cfg);
  const TrainedHead initial = train_base(blocks, 2, 1, 3, none);
  CHECK(moved.weights.weight == initial.weights.weight);
  CHECK(moved.weights.bias == initial.weights.bias);
  CHECK(moved.prototypes == initial.prototypes);
}

TEST_CASE("training input checks") {
  auto blocks = separable_blocks(10);
  TrainingConfig cfg;
  cfg.fake_novel = 0;
  CHECK_THROWS_AS(train_base(blocks, 1, 1, 3, cfg), InvariantError);
  CHECK_THROWS_AS(train_base(blocks, 3, 1, 3, cfg), InvariantError);  // slot 2 never appears
  CHECK_THROWS_AS(train_base(blocks, 2, 2, 3, cfg), InvariantError);  // width mismatch
  cfg.fake_novel = 2;
  CHECK_THROWS_AS(train_base(blocks, 2, 1, 3, cfg), InvariantError);
  for (auto& b : blocks) b.inputs(0, 0) = std::numeric_limits<double>::infinity();
  cfg.fake_novel = 0;
  cfg.epochs = 1;
  try {
    train_base(blocks, 2, 1, 3, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}
