// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gwseg/evaluation.hpp"
#include "oracles.hpp"

using namespace gwseg;

namespace {

ClassRegistry registry(std::vector<ClassId> base, std::vector<ClassId> novel) {
  ClassRegistry r;
  r.base_classes = std::move(base);
  r.novel_classes = std::move(novel);
  return r;
}

}  // namespace

TEST_CASE("confusion matrix counts") {
  const std::vector<ClassId> gt{0, 0, 1, 1}, pred{0, 0, 0, 0};
  const ConfusionMatrix m = confusion_matrix(pred, gt, 2);
  CHECK(m(0, 0) == 2);
  CHECK(m(0, 1) == 0);
  CHECK(m(1, 0) == 2);
  CHECK(m(1, 1) == 0);

  const std::vector<ClassId> same{2, 0, 1, 2, 2};
  const ConfusionMatrix d = confusion_matrix(same, same, 3);
  CHECK(d.diagonal().sum() == 5);
  CHECK(d.sum() == 5);

  CHECK(confusion_matrix(std::vector<ClassId>{}, std::vector<ClassId>{}, 3).isZero());
  try {
    confusion_matrix(std::vector<ClassId>{0, 5}, std::vector<ClassId>{0, 1}, 3);
    FAIL("expected an error");
  } catch (const InvariantError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
  CHECK_THROWS_AS(confusion_matrix(std::vector<ClassId>{0}, std::vector<ClassId>{0, 1}, 3), InvariantError);
}

TEST_CASE("IoU on the half-and-half example") {
  const std::vector<ClassId> gt{0, 0, 1, 1}, pred{0, 0, 0, 0};
  const EvalReport r = miou_report(confusion_matrix(pred, gt, 2), registry({0}, {1}));
  CHECK(*r.iou[0] == 0.5);
  CHECK(*r.iou[1] == 0.0);
  CHECK(*r.miou_all == 0.25);
  CHECK(*r.miou_base == 0.5);
  CHECK(*r.miou_novel == 0.0);
  CHECK(*r.hm == 0.0);
}

TEST_CASE("perfect predictions score one everywhere") {
  const std::vector<ClassId> gt{0, 1, 2, 3, 3, 2};
  const EvalReport r = miou_report(confusion_matrix(gt, gt, 4), registry({0, 1}, {2, 3}));
  for (const auto& v : r.iou) CHECK(*v == 1.0);
  CHECK(*r.miou_base == 1.0);
  CHECK(*r.miou_novel == 1.0);
  CHECK(*r.miou_all == 1.0);
  CHECK(*r.hm == 1.0);
}

TEST_CASE("absent classes are left out of the means") {
  const std::vector<ClassId> gt{0, 0, 1}, pred{0, 1, 1};
  const EvalReport r = miou_report(confusion_matrix(pred, gt, 3), registry({0, 2}, {1}));
  CHECK_FALSE(r.iou[2].has_value());
  CHECK(*r.miou_base == 0.5);
  CHECK(*r.miou_all == doctest::Approx((0.5 + 0.5) / 2));
  const EvalReport none = miou_report(confusion_matrix(gt, gt, 3), registry({0, 1, 2}, {}));
  CHECK_FALSE(none.miou_novel.has_value());
  CHECK_FALSE(none.hm.has_value());
}

TEST_CASE("per-class IoU matches the label-list oracle and mIoU-A is their mean") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> lab(0, 6);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> gt(400), pred(400);
    for (auto& x : gt) x = lab(rng);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = (i % 3 == 0) ? lab(rng) : gt[i];
    const EvalReport r = miou_report(confusion_matrix(pred, gt, 7), registry({0, 1, 2, 3}, {4, 5, 6}));
    const auto expected = oracle::iou(pred, gt, 7);
    double sum = 0.0;
    for (int c = 0; c < 7; ++c) {
      REQUIRE(r.iou[c].has_value());
      CHECK(*r.iou[c] == doctest::Approx(expected[c]).epsilon(1e-15));
      sum += expected[c];
    }
    CHECK(*r.miou_all == doctest::Approx(sum / 7).epsilon(1e-14));
  }
}

TEST_CASE("harmonic mean") {
  CHECK(harmonic_mean(0.60, 0.30) == 0.40);
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
  CHECK(harmonic_mean(0.7, 0.0) == 0.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const double x = u(rng);
    CHECK(harmonic_mean(x, x) == x);
  }
  for (int t = 0; t < 1000; ++t) {
    const double a = u(rng), b = u(rng);
    const double hm = harmonic_mean(a, b), gm = std::sqrt(a * b), am = (a + b) / 2;
    const double slack = 1e-15 * am;  // one rounding step
    CHECK(std::min(a, b) <= hm + slack);
    CHECK(hm <= gm + slack);
    CHECK(gm <= am + slack);
  }
}

TEST_CASE("aggregation over seeds") {
  std::vector<EvalReport> runs(5);
  const double base[5] = {0.5, 0.6, 0.55, 0.65, 0.7};
  const double novel[5] = {0.2, 0.3, 0.25, 0.1, 0.15};
  for (int s = 0; s < 5; ++s) {
    runs[s].miou_base = base[s];
    runs[s].miou_novel = novel[s];
    runs[s].hm = harmonic_mean(base[s], novel[s]);
    runs[s].seed = static_cast<std::uint64_t>(s);
  }
  const AggregateReport agg = aggregate_reports(runs);
  CHECK(agg.runs == 5);
  CHECK(agg.miou_base.mean == doctest::Approx(0.6));
  // sample standard deviation of {0.5,0.6,0.55,0.65,0.7}
  CHECK(agg.miou_base.stddev == doctest::Approx(std::sqrt(0.025 / 4)));
  CHECK(agg.miou_novel.mean == doctest::Approx(0.2));
  CHECK(agg.miou_all.count == 0);

  std::ostringstream csv;
  write_aggregate_csv(csv, agg);
  CHECK(csv.str().rfind("metric,mean,std,runs\n", 0) == 0);
  CHECK(csv.str().find("\nmiou_base,") != std::string::npos);
}

TEST_CASE("report CSV round trip and table") {
  const std::vector<ClassId> gt{0, 0, 1, 1, 2}, pred{0, 1, 1, 1, 0};
  const ClassRegistry reg = registry({0, 1}, {2});
  EvalReport r = miou_report(confusion_matrix(pred, gt, 3), reg);
  r.seed = 18446744073709551557ULL;
  r.shots = 5;
  std::stringstream csv;
  write_report_csv(csv, r, reg);
  const EvalReport back = read_report_csv(csv);
  CHECK(back.miou_base == r.miou_base);
  CHECK(back.miou_novel == r.miou_novel);
  CHECK(back.hm == r.hm);
  CHECK(back.seed == r.seed);
  CHECK(back.shots == 5);

  std::ostringstream table;
  write_report_table(table, r, reg);
  CHECK(table.str().find("HM") != std::string::npos);

  std::istringstream bad("nope\n");
  CHECK_THROWS_AS(read_report_csv(bad), FormatError);
}
