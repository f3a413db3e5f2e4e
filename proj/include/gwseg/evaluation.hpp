// SPDX-License-Identifier: Apache-2.0

#ifndef GWSEG_EVALUATION_HPP
#define GWSEG_EVALUATION_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gwseg/blocks.hpp"
#include "gwseg/common.hpp"

namespace gwseg {

/// Rows are ground truth, columns predictions.
using ConfusionMatrix = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ConfusionMatrix confusion_matrix(std::span<const ClassId> pred, std::span<const ClassId> gt,
                                 int n_classes);

struct EvalReport {
  ConfusionMatrix confusion;
  /// IoU per class id; empty when the class has neither ground truth nor
  /// predictions (such classes are left out of every mean).
  std::vector<std::optional<double>> iou;
  std::optional<double> miou_base;
  std::optional<double> miou_novel;
  std::optional<double> miou_all;
  std::optional<double> hm;
  std::uint64_t seed = 0;
  int shots = 0;
};

EvalReport miou_report(const ConfusionMatrix& confusion, const ClassRegistry& registry);

/// 2ab/(a+b), with HM(0,0) = 0.
double harmonic_mean(double miou_base, double miou_novel);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  std::size_t count = 0;
};

struct AggregateReport {
  MetricSummary miou_base, miou_novel, miou_all, hm;
  std::size_t runs = 0;
};

/// Mean and standard deviation per metric over runs that define it.
AggregateReport aggregate_reports(std::span<const EvalReport> reports);

/// CSV with one `metric,value` row per group metric and one row per class.
void write_report_csv(std::ostream& out, const EvalReport& report, const ClassRegistry& registry);
void write_report_table(std::ostream& out, const EvalReport& report, const ClassRegistry& registry);
/// Reads back the summary metrics, seed and shots of a report CSV.
EvalReport read_report_csv(std::istream& in);
void write_aggregate_csv(std::ostream& out, const AggregateReport& agg);

}  // namespace gwseg

#endif  // GWSEG_EVALUATION_HPP
