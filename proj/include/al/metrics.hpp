#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "al/loop.hpp"

namespace al {

struct CurvePoint {
  std::size_t num_labeled = 0;
  double accuracy = 0.0;
};

/// At least one point, strictly increasing num_labeled, accuracies in [0,1].
class LearningCurve {
 public:
  explicit LearningCurve(std::vector<CurvePoint> points);
  std::span<const CurvePoint> points() const { return points_; }

 private:
  std::vector<CurvePoint> points_;
};

/// Learning curve of a run, optionally without the seed-model point.
LearningCurve learning_curve(const ExperimentResult& result, bool include_seed_model);

/// Trapezoidal area under accuracy over num_labeled divided by the
/// num_labeled span; a single point yields its accuracy.
double auc(const LearningCurve& curve);

/// dataset -> strategy -> metric value (higher is better).
using MetricTable = std::map<std::string, std::map<std::string, double>>;

/// Per dataset, rank 1 = best with tied values sharing the mean of their
/// positions; returns each strategy's mean rank across datasets.
std::map<std::string, double> mean_rank(const MetricTable& table);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // Bessel-corrected; 0 for a single value
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

struct GroupKey {
  std::string dataset;
  std::string classifier;
  std::string strategy;
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct GroupStats {
  Summary final_accuracy;
  Summary auc;
  Summary query_seconds;  // of each run's mean per-iteration query time
};

std::map<GroupKey, GroupStats> aggregate(std::span<const ExperimentResult> results);

/// Mean query time over a run's querying iterations (iteration 0 excluded).
double mean_query_seconds(const ExperimentResult& result);

enum class ReportFormat { kCsv, kMarkdown };

ReportFormat parse_report_format(std::string_view name);

struct ReportDocument {
  std::string name;
  std::string content;
};

/// Summary (mean rank / mean result), per-dataset accuracy and AUC, query
/// time, and the per-run learning-curve CSV.
std::vector<ReportDocument> render_report(std::span<const ExperimentResult> results, ReportFormat format);

/// "0.802±0.000" style cell.
std::string format_mean_sd(double mean, double sd, int decimals = 3);
std::string format_fixed(double value, int decimals);

}  // namespace al
