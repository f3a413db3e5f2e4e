// SPDX-License-Identifier: Apache-2.0

#include "gwseg/evaluation.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace gwseg {

ConfusionMatrix confusion_matrix(std::span<const ClassId> pred, std::span<const ClassId> gt,
                                 int n_classes) {
  if (pred.size() != gt.size()) {
    throw InvariantError("prediction has " + std::to_string(pred.size()) +
                         " labels but ground truth has " + std::to_string(gt.size()));
  }
  if (n_classes < 1) throw InvariantError("class count must be >= 1");
  ConfusionMatrix m = ConfusionMatrix::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 0 || gt[i] >= n_classes) {
      throw InvariantError("ground-truth label " + std::to_string(gt[i]) + " at index " +
                           std::to_string(i) + " is out of range");
    }
    if (pred[i] < 0 || pred[i] >= n_classes) {
      throw InvariantError("predicted label " + std::to_string(pred[i]) + " at index " +
                           std::to_string(i) + " is out of range");
    }
    ++m(gt[i], pred[i]);
  }
  return m;
}

double harmonic_mean(double miou_base, double miou_novel) {
  if (miou_base == miou_novel) return miou_base;  // exact where 2xx/(x+x) may round
  const double s = miou_base + miou_novel;
  return s > 0.0 ? 2.0 * miou_base * miou_novel / s : 0.0;
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& iou,
                              const std::vector<ClassId>& classes) {
  double sum = 0.0;
  std::size_t n = 0;
  for (ClassId c : classes) {
    if (c >= 0 && static_cast<std::size_t>(c) < iou.size() && iou[c]) {
      sum += *iou[c];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

void put_metric(std::ostream& out, const char* name, const std::optional<double>& v) {
  out << name << ',';
  if (v) {
    out << std::setprecision(17) << *v;
  } else {
    out << "nan";
  }
  out << '\n';
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace

EvalReport miou_report(const ConfusionMatrix& confusion, const ClassRegistry& registry) {
  if (confusion.rows() != confusion.cols() ||
      static_cast<std::size_t>(confusion.rows()) != registry.class_count()) {
    throw InvariantError("confusion matrix size does not match the class registry");
  }
  EvalReport r;
  r.confusion = confusion;
  const Eigen::Index n = confusion.rows();
  r.iou.resize(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto tp = static_cast<double>(confusion(c, c));
    const auto gt_total = static_cast<double>(confusion.row(c).sum());
    const auto pred_total = static_cast<double>(confusion.col(c).sum());
    const double uni = gt_total + pred_total - tp;  // TP + FP + FN
    if (uni > 0.0) r.iou[c] = tp / uni;
  }
  r.miou_base = mean_of(r.iou, registry.base_classes);
  r.miou_novel = mean_of(r.iou, registry.novel_classes);
  r.miou_all = mean_of(r.iou, registry.all_classes());
  if (r.miou_base && r.miou_novel) r.hm = harmonic_mean(*r.miou_base, *r.miou_novel);
  return r;
}

AggregateReport aggregate_reports(std::span<const EvalReport> reports) {
  std::vector<double> b, n, a, h;
  for (const auto& r : reports) {
    if (r.miou_base) b.push_back(*r.miou_base);
    if (r.miou_novel) n.push_back(*r.miou_novel);
    if (r.miou_all) a.push_back(*r.miou_all);
    if (r.hm) h.push_back(*r.hm);
  }
  AggregateReport agg;
  agg.runs = reports.size();
  agg.miou_base = summarize(b);
  agg.miou_novel = summarize(n);
  agg.miou_all = summarize(a);
  agg.hm = summarize(h);
  return agg;
}

void write_report_csv(std::ostream& out, const EvalReport& report, const ClassRegistry& registry) {
  out << "metric,value\n";
  put_metric(out, "miou_base", report.miou_base);
  put_metric(out, "miou_novel", report.miou_novel);
  put_metric(out, "miou_all", report.miou_all);
  put_metric(out, "hm", report.hm);
  out << "seed," << report.seed << "\nshots," << report.shots << '\n';
  for (std::size_t c = 0; c < report.iou.size(); ++c) {
    const std::string name = "iou_" + registry.name_of(static_cast<ClassId>(c));
    put_metric(out, name.c_str(), report.iou[c]);
  }
}

void write_report_table(std::ostream& out, const EvalReport& report, const ClassRegistry& registry) {
  auto pct = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(2) << 100.0 * *v;
    } else {
      s << "-";
    }
    return s.str();
  };
  out << std::left << std::setw(16) << "class" << std::setw(8) << "split" << "IoU\n";
  for (std::size_t c = 0; c < report.iou.size(); ++c) {
    const auto id = static_cast<ClassId>(c);
    out << std::setw(16) << registry.name_of(id) << std::setw(8)
        << (registry.is_novel(id) ? "novel" : "base") << pct(report.iou[c]) << '\n';
  }
  out << "mIoU-B " << pct(report.miou_base) << "  mIoU-N " << pct(report.miou_novel) << "  mIoU-A "
      << pct(report.miou_all) << "  HM " << pct(report.hm) << '\n';
}

EvalReport read_report_csv(std::istream& in) {
  EvalReport report;
  std::string line;
  if (!std::getline(in, line) || line != "metric,value") {
    throw FormatError("report: expected header 'metric,value'");
  }
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("report: malformed row '" + line + "'");
    const std::string key = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    std::optional<double> v;
    try {
      if (key == "seed") {
        report.seed = std::stoull(value);
        continue;
      }
      if (value != "nan") v = std::stod(value);
    } catch (const std::exception&) {
      throw FormatError("report: bad value in row '" + line + "'");
    }
    if (key == "miou_base") report.miou_base = v;
    else if (key == "miou_novel") report.miou_novel = v;
    else if (key == "miou_all") report.miou_all = v;
    else if (key == "hm") report.hm = v;
    else if (key == "shots" && v) report.shots = static_cast<int>(*v);
  }
  return report;
}

void write_aggregate_csv(std::ostream& out, const AggregateReport& agg) {
  out << "metric,mean,std,runs\n" << std::setprecision(17);
  auto row = [&](const char* name, const MetricSummary& s) {
    out << name << ',' << s.mean << ',' << s.stddev << ',' << s.count << '\n';
  };
  row("miou_base", agg.miou_base);
  row("miou_novel", agg.miou_novel);
  row("miou_all", agg.miou_all);
  row("hm", agg.hm);
}

}  // namespace gwseg
