// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "gwseg/blocks.hpp"
#include "gwseg/features.hpp"
#include "gwseg/prototypes.hpp"
#include "oracles.hpp"

using namespace gwseg;

namespace {

GeometricPrototype raw(const Vector& h, ClassId c = 0) {
  GeometricPrototype p;
  p.class_id = c;
  p.histogram = h;
  return p;
}

int support_size(const Vector& v) { return static_cast<int>((v.array() > 0.0).count()); }

}  // namespace

TEST_CASE("histogram of word assignments") {
  const std::vector<int> a{0, 0, 1, 2};
  const GeometricPrototype p = build_geometric_prototype(4, a, 3);
  CHECK(p.class_id == 4);
  CHECK_FALSE(p.pruned);
  CHECK(p.histogram == Eigen::Vector3d(0.5, 0.25, 0.25));
  const std::vector<int> one(9, 2);
  CHECK(build_geometric_prototype(0, one, 4).histogram == Eigen::Vector4d(0, 0, 1, 0));
  CHECK_THROWS_AS(build_geometric_prototype(0, std::vector<int>{}, 3), InvariantError);
  CHECK_THROWS_AS(build_geometric_prototype(0, std::vector<int>{3}, 3), InvariantError);
}

TEST_CASE("histogram of a union is the count-weighted average") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> w(0, 7);
  std::vector<int> a(37), b(91);
  for (auto& x : a) x = w(rng);
  for (auto& x : b) x = w(rng);
  std::vector<int> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  const Vector mix = (37.0 * build_geometric_prototype(0, a, 8).histogram +
                      91.0 * build_geometric_prototype(0, b, 8).histogram) / 128.0;
  CHECK((build_geometric_prototype(0, ab, 8).histogram - mix).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("pruning the worked example") {
  const GeometricPrototype p = prune_minor_frequencies(raw(Eigen::Vector4d(0.5, 0.3, 0.15, 0.05)), 0.9);
  CHECK(p.pruned);
  CHECK(p.alpha == 0.9);
  CHECK(std::abs(p.histogram[0] - 10.0 / 19.0) < 1e-12);
  CHECK(std::abs(p.histogram[1] - 6.0 / 19.0) < 1e-12);
  CHECK(std::abs(p.histogram[2] - 3.0 / 19.0) < 1e-12);
  CHECK(p.histogram[3] == 0.0);
}

TEST_CASE("alpha = 1 and one-hot histograms are untouched") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const Vector h = oracle::random_histogram(rng, 1 + t % 16);
    CHECK(prune_minor_frequencies(raw(h), 1.0).histogram == h);
  }
  const Vector onehot = Eigen::Vector4d(0, 0, 1, 0);
  for (double a : {0.01, 0.5, 0.9, 1.0}) CHECK(prune_minor_frequencies(raw(onehot), a).histogram == onehot);
}

TEST_CASE("pruning agrees with the prefix-enumeration oracle") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> hdist(1, 16);
  std::uniform_real_distribution<double> adist(0.05, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const Vector h = oracle::random_histogram(rng, hdist(rng));
    const double a = t % 2 ? adist(rng) : std::array{0.5, 0.85, 0.9, 0.95, 1.0}[t % 5];
    const GeometricPrototype p = prune_minor_frequencies(raw(h), a);
    CHECK(p.histogram == oracle::prune(h, a));
    CHECK(support_size(p.histogram) <= support_size(h));
    CHECK(p.histogram.sum() == doctest::Approx(1.0).epsilon(1e-6));
    p.validate();
  }
}

TEST_CASE("support grows with alpha") {
  std::mt19937_64 rng(4);
  const std::vector<double> alphas{0.3, 0.5, 0.7, 0.85, 0.9, 0.95, 1.0};
  for (int t = 0; t < 300; ++t) {
    const Vector h = oracle::random_histogram(rng, 12);
    for (std::size_t i = 0; i + 1 < alphas.size(); ++i) {
      const Vector lo = prune_minor_frequencies(raw(h), alphas[i]).histogram;
      const Vector hi = prune_minor_frequencies(raw(h), alphas[i + 1]).histogram;
      for (Eigen::Index j = 0; j < h.size(); ++j) {
        if (lo[j] > 0.0) CHECK(hi[j] > 0.0);
      }
    }
  }
}

TEST_CASE("pruning a pruned prototype at the same alpha is a no-op") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    const Vector h = oracle::random_histogram(rng, 10);
    const GeometricPrototype once = prune_minor_frequencies(raw(h), 0.9);
    CHECK(prune_minor_frequencies(once, 0.9) == once);
  }
}

TEST_CASE("re-pruning a renormalized histogram as raw input can shrink it further") {
  // After renormalization the top entry alone can clear alpha.
  const GeometricPrototype once = prune_minor_frequencies(raw(Eigen::Vector3d(0.89, 0.09, 0.02)), 0.9);
  CHECK(support_size(once.histogram) == 2);
  const GeometricPrototype again = prune_minor_frequencies(raw(once.histogram), 0.9);
  CHECK(support_size(again.histogram) == 1);
}

TEST_CASE("pruning input checks") {
  CHECK_THROWS_AS(prune_minor_frequencies(raw(Eigen::Vector2d(0.5, 0.5)), 0.0), InvariantError);
  CHECK_THROWS_AS(prune_minor_frequencies(raw(Eigen::Vector2d(0.5, 0.5)), 1.5), InvariantError);
  CHECK_THROWS_AS(prune_minor_frequencies(raw(Eigen::Vector2d(0.5, 0.6)), 0.9), InvariantError);
  CHECK_THROWS_AS(prune_minor_frequencies(raw(Eigen::Vector2d(1.5, -0.5)), 0.9), InvariantError);
}

namespace {

// A vocabulary of axis words and a head that passes semantic inputs through.
struct Fixture {
  Vocabulary vocab;
  FusionWeights head;
};

Fixture axis_fixture(int words, int sem_dim) {
  Fixture f;
  f.vocab.words = Matrix::Identity(words, words);
  f.head.geo_dim = words;
  f.head.sem_dim = sem_dim;
  f.head.weight = Matrix::Zero(sem_dim, words + sem_dim);
  f.head.weight.rightCols(sem_dim) = Matrix::Identity(sem_dim, sem_dim);
  f.head.bias = Vector::Zero(sem_dim);
  f.head.trained = true;
  return f;
}

SupportBlock shot(std::vector<std::uint8_t> mask) {
  SupportBlock s;
  s.block.input_features = Matrix::Zero(static_cast<Eigen::Index>(mask.size()), 9);
  for (std::size_t i = 0; i < mask.size(); ++i) s.block.source_indices.push_back(i);
  s.mask = std::move(mask);
  return s;
}

}  // namespace

TEST_CASE("novel registration from constant features") {
  const Fixture fx = axis_fixture(8, 3);
  const Vector v = Eigen::Vector3d(0.3, 1.2, 0.4);
  // Every point sits on word 7 and fuses to v.
  const FeatureProvider provider = [&](const SampledBlock& b) {
    BlockFeatures f;
    const auto n = static_cast<Eigen::Index>(b.size());
    f.low.values = Matrix::Zero(n, 8);
    f.low.values.col(7).setOnes();
    f.low.normalized = true;
    f.semantic.values = v.transpose().replicate(n, 1);
    return f;
  };
  SupportSet support;
  support.shot_count = 1;
  support.classes[5].push_back(shot({1, 0, 1, 1, 0, 1}));
  const auto out = register_novel_classes(support, fx.vocab, fx.head, provider, 10.0, 0.9);
  REQUIRE(out.size() == 1);
  const ClassPrototypes& cp = out.at(5);
  CHECK((cp.semantic.weight - v.normalized()).norm() < 1e-12);
  CHECK(cp.geometric.histogram == (Vector::Unit(8, 7)));
  CHECK(cp.pruned.histogram == cp.geometric.histogram);
  CHECK(cp.pruned.pruned);

  FusionWeights untrained = fx.head;
  untrained.trained = false;
  CHECK_THROWS_AS(register_novel_classes(support, fx.vocab, untrained, provider, 10.0, 0.9), InvariantError);
  support.classes[5][0].mask.assign(6, 0);
  CHECK_THROWS_AS(register_novel_classes(support, fx.vocab, fx.head, provider, 10.0, 0.9), InvariantError);
}

TEST_CASE("five shots pool exactly like one concatenated shot") {
  const Fixture fx = axis_fixture(6, 4);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> word(0, 5);
  // Per-point features keyed by a global point id stored in source_indices.
  const std::size_t total = 5 * 30;
  Matrix low = Matrix::Zero(static_cast<Eigen::Index>(total), 6);
  Matrix sem(static_cast<Eigen::Index>(total), 4);
  std::vector<std::uint8_t> mask(total);
  for (std::size_t i = 0; i < total; ++i) {
    low(static_cast<Eigen::Index>(i), word(rng)) = 1.0;
    for (int j = 0; j < 4; ++j) sem(static_cast<Eigen::Index>(i), j) = std::abs(g(rng));
    mask[i] = (i % 3) != 0;
  }
  FeatureMatrix lf, sf;
  lf.values = low;
  lf.normalized = true;
  sf.values = sem;
  const FeatureProvider provider = ingested_provider(lf, sf);

  auto make = [&](std::size_t first, std::size_t count) {
    SupportBlock s;
    s.block.input_features = Matrix::Zero(static_cast<Eigen::Index>(count), 9);
    for (std::size_t i = 0; i < count; ++i) {
      s.block.source_indices.push_back(first + i);
      s.mask.push_back(mask[first + i]);
    }
    return s;
  };
  SupportSet five, one;
  for (std::size_t k = 0; k < 5; ++k) five.classes[2].push_back(make(30 * k, 30));
  one.classes[2].push_back(make(0, total));
  const auto a = register_novel_classes(five, fx.vocab, fx.head, provider, 10.0, 0.9).at(2);
  const auto b = register_novel_classes(one, fx.vocab, fx.head, provider, 10.0, 0.9).at(2);
  CHECK((a.semantic.weight - b.semantic.weight).norm() < 1e-12);
  CHECK(a.geometric == b.geometric);
  CHECK(a.pruned == b.pruned);
}
