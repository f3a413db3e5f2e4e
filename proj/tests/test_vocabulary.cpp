// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "gwseg/vocabulary.hpp"

using namespace gwseg;

namespace {

FeatureMatrix unit_rows(const Matrix& m) {
  FeatureMatrix f;
  f.values = m;
  normalize_rows(f);
  return f;
}

Vocabulary fixed_vocab(const Matrix& words) {
  Vocabulary v;
  v.words = words;
  return v;
}

}  // namespace

TEST_CASE("two antipodal clusters on the circle") {
  Matrix x(6, 2);
  x << 1.0, 0.02, 1.0, -0.01, 1.0, 0.05, -1.0, 0.1, -1.0, 0.12, -1.0, 0.08;
  const FeatureMatrix f = unit_rows(x);
  const Vocabulary v = build_vocabulary(f, 2, {});
  // oracle: normalized mean of each half
  const Eigen::RowVector2d a = f.values.topRows(3).colwise().sum().normalized();
  const Eigen::RowVector2d b = f.values.bottomRows(3).colwise().sum().normalized();
  const int ia = v.words(0, 0) > 0 ? 0 : 1;
  CHECK((v.words.row(ia) - a).norm() < 1e-12);
  CHECK((v.words.row(1 - ia) - b).norm() < 1e-12);
  CHECK(v.member_counts[ia] == 3);
}

TEST_CASE("a single word is the normalized global mean") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(40, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng) + 0.5;
  const FeatureMatrix f = unit_rows(x);
  const Vocabulary v = build_vocabulary(f, 1, {});
  CHECK((v.words.row(0) - f.values.colwise().sum().normalized()).norm() < 1e-12);
  CHECK_THROWS_AS(v.validate(), InvariantError);
}

TEST_CASE("K-means objective trace matches a recomputation and never increases") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(300, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const FeatureMatrix f = unit_rows(x);
  KMeansConfig cfg;
  cfg.seed = 17;
  const Vocabulary v = build_vocabulary(f, 8, cfg);
  for (std::size_t t = 1; t < v.objective_trace.size(); ++t) {
    CHECK(v.objective_trace[t] <= v.objective_trace[t - 1]);
  }
  double final_objective = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    final_objective += 1.0 - (v.words * f.values.row(i).transpose()).maxCoeff();
  }
  CHECK(final_objective == doctest::Approx(v.objective_trace.back()).epsilon(1e-12));
  for (Eigen::Index h = 0; h < v.words.rows(); ++h) {
    CHECK(v.words.row(h).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  std::size_t members = 0;
  for (auto c : v.member_counts) members += c;
  CHECK(members == 300);
}

TEST_CASE("vocabulary building is bit-identical per seed") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(200, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const FeatureMatrix f = unit_rows(x);
  KMeansConfig cfg;
  cfg.seed = 5;
  const Vocabulary a = build_vocabulary(f, 6, cfg);
  const Vocabulary b = build_vocabulary(f, 6, cfg);
  CHECK(a.words == b.words);
  CHECK(a.objective_trace == b.objective_trace);
  cfg.seed = 6;
  CHECK_FALSE(build_vocabulary(f, 6, cfg).words == a.words);
}

TEST_CASE("seeding alone places one word in each of eight tight clusters") {
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Matrix x(8 * 50, 8);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < 8; ++j) x(i, j) = 0.02 * g(rng);
      x(i, i % 8) += 1.0;
    }
    KMeansConfig cfg;
    cfg.seed = seed;
    cfg.max_iterations = 0;
    const Vocabulary v = build_vocabulary(unit_rows(x), 8, cfg);
    for (int c = 0; c < 8; ++c) CHECK(v.words.col(c).maxCoeff() > 0.99);
  }
}

TEST_CASE("vocabulary input checks") {
  FeatureMatrix raw;
  raw.values = Matrix::Constant(5, 3, 2.0);
  CHECK_THROWS_AS(build_vocabulary(raw, 2, {}), InvariantError);
  const FeatureMatrix f = unit_rows(Matrix::Random(5, 3));
  CHECK_THROWS_AS(build_vocabulary(f, 6, {}), InvariantError);
  CHECK_THROWS_AS(build_vocabulary(f, 0, {}), InvariantError);
  // Identical descriptors cannot seed two distinct words.
  const FeatureMatrix same = unit_rows(Matrix::Constant(10, 3, 1.0));
  CHECK_THROWS_AS(build_vocabulary(same, 2, {}), InvariantError);
}

TEST_CASE("soft assignment values") {
  Matrix w(2, 2);
  w << 1, 0, 0, 1;
  const Vocabulary v = fixed_vocab(w);
  const Vector p = soft_assign(Eigen::Vector2d(1, 0), v, 10.0);
  const double e = std::exp(-10.0);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(4.54e-5).epsilon(1e-3));

  const Vector half = soft_assign(Eigen::Vector2d(1, 1).normalized(), v, 10.0);
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));

  Matrix ring(5, 2);
  for (int h = 0; h < 5; ++h) ring.row(h) << 0.0, 1.0;
  const Vector uniform = soft_assign(Eigen::Vector2d(1, 0), fixed_vocab(ring), 3.0);
  for (int h = 0; h < 5; ++h) CHECK(uniform[h] == doctest::Approx(0.2));
  CHECK_THROWS_AS(soft_assign(Eigen::Vector2d(1, 0), v, 0.0), InvariantError);
  CHECK_THROWS_AS(soft_assign(Eigen::Vector3d(1, 0, 0), v, 1.0), InvariantError);
}

TEST_CASE("hard assignment") {
  // Words whose cosines with e0 are 0.2, 0.9, 0.5.
  Matrix w(3, 2);
  for (int h = 0; h < 3; ++h) {
    const double c = std::array{0.2, 0.9, 0.5}[h];
    w.row(h) << c, std::sqrt(1.0 - c * c);
  }
  CHECK(hard_assign(Eigen::Vector2d(1, 0), fixed_vocab(w)) == 1);
  Matrix tie(2, 2);
  tie << 0.7, std::sqrt(0.51), 0.7, -std::sqrt(0.51);
  CHECK(hard_assign(Eigen::Vector2d(1, 0), fixed_vocab(tie)) == 0);
}

TEST_CASE("large temperatures concentrate on the hard assignment") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  const FeatureMatrix words = unit_rows([&] {
    Matrix m(12, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
  }());
  const Vocabulary v = fixed_vocab(words.values);
  int checked = 0;
  for (int t = 0; t < 500; ++t) {
    Vector x(5);
    for (auto& e : x) e = g(rng);
    x.normalize();
    Vector sims = v.words * x;
    std::vector<double> sorted(sims.data(), sims.data() + sims.size());
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] - sorted[1] < 0.01) continue;
    ++checked;
    CHECK(soft_assign(x, v, 1e4)[hard_assign(x, v)] > 0.99);
  }
  CHECK(checked > 100);
}

TEST_CASE("activation masks partition the points") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(150, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const FeatureMatrix f = unit_rows(x);
  const Vocabulary v = build_vocabulary(f, 5, {});
  const auto words = hard_assign_all(f, v);
  std::vector<int> total(150, 0);
  for (int h = 0; h < 5; ++h) {
    const auto mask = activation_mask(f, v, h);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      CHECK(mask[i] == (words[i] == h ? 1 : 0));
      total[i] += mask[i];
    }
  }
  for (int t : total) CHECK(t == 1);

  // Every point nearest word 3 gives an all-ones mask for 3 and zeros elsewhere.
  Matrix w = Matrix::Identity(4, 4);
  FeatureMatrix near3;
  near3.values = Matrix::Zero(7, 4);
  near3.values.col(3).setOnes();
  near3.normalized = true;
  const Vocabulary basis = fixed_vocab(w);
  for (auto m : activation_mask(near3, basis, 3)) CHECK(m == 1);
  for (auto m : activation_mask(near3, basis, 1)) CHECK(m == 0);
}

TEST_CASE("soft rows sum to one and agree with single-row evaluation") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(64, 8), w(10, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
  const FeatureMatrix f = unit_rows(x);
  const Vocabulary v = fixed_vocab(unit_rows(w).values);
  const Matrix s = soft_assign_all(f, v, 10.0);
  const auto hard = hard_assign_all(f, v);
  for (Eigen::Index i = 0; i < 64; ++i) {
    CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((s.row(i).array() > 0.0).all());
    CHECK((s.row(i).transpose() - soft_assign(f.values.row(i).transpose(), v, 10.0)).norm() < 1e-14);
    CHECK(hard[i] == hard_assign(f.values.row(i).transpose(), v));
  }
}
