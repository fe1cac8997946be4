#include "al/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "al/results_io.hpp"

namespace al {

LearningCurve::LearningCurve(std::vector<CurvePoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("learning curve needs at least one point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double a = points_[i].accuracy;
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("learning curve accuracy outside [0, 1]");
    if (i > 0 && points_[i].num_labeled <= points_[i - 1].num_labeled) {
      throw std::invalid_argument("learning curve num_labeled must be strictly increasing");
    }
  }
}

LearningCurve learning_curve(const ExperimentResult& result, bool include_seed_model) {
  std::vector<CurvePoint> points;
  for (const auto& r : result.records) {
    if (r.iteration == 0 && !include_seed_model && result.records.size() > 1) continue;
    points.push_back({r.num_labeled, r.test_accuracy});
  }
  return LearningCurve(std::move(points));
}

double auc(const LearningCurve& curve) {
  const auto pts = curve.points();
  if (pts.size() == 1) return pts.front().accuracy;
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto width = static_cast<double>(pts[i].num_labeled - pts[i - 1].num_labeled);
    area += 0.5 * width * (pts[i].accuracy + pts[i - 1].accuracy);
  }
  const auto span = static_cast<double>(pts.back().num_labeled - pts.front().num_labeled);
  const auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.accuracy < b.accuracy;
  });
  // The clamp keeps a constant curve exact despite rounding in the sum.
  return std::clamp(area / span, lo->accuracy, hi->accuracy);
}

std::map<std::string, double> mean_rank(const MetricTable& table) {
  if (table.empty()) throw std::invalid_argument("mean_rank: no datasets");
  const auto& reference = table.begin()->second;
  if (reference.empty()) throw std::invalid_argument("mean_rank: no strategies");
  std::map<std::string, double> totals;
  for (const auto& [dataset, values] : table) {
    for (const auto& [strategy, value] : reference) {
      if (!values.contains(strategy)) {
        throw std::invalid_argument("mean_rank: dataset '" + dataset + "' lacks strategy '" + strategy + "'");
      }
    }
    if (values.size() != reference.size()) {
      throw std::invalid_argument("mean_rank: dataset '" + dataset + "' has strategies missing elsewhere");
    }
    std::vector<std::pair<std::string, double>> ordered(values.begin(), values.end());
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ordered.size();) {
      std::size_t j = i;
      while (j < ordered.size() && ordered[j].second == ordered[i].second) ++j;
      // Positions i+1..j share their mean.
      const double rank = 0.5 * static_cast<double>(i + 1 + j);
      for (std::size_t t = i; t < j; ++t) totals[ordered[t].first] += rank;
      i = j;
    }
  }
  for (auto& [strategy, total] : totals) total /= static_cast<double>(table.size());
  return totals;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("cannot summarize an empty group");
  Summary s;
  s.count = values.size();
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    s.mean = values.front();
    return s;
  }
  {
    double sq = 0.0;
    for (const double v : values) sq += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

double mean_query_seconds(const ExperimentResult& result) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : result.records) {
    if (r.iteration == 0) continue;
    total += r.query_seconds;
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

namespace {

GroupKey key_of(const ExperimentResult& r) {
  return {r.config.dataset_name, r.config.classifier.name(), std::string(to_string(r.config.strategy))};
}

}  // namespace

std::map<GroupKey, GroupStats> aggregate(std::span<const ExperimentResult> results) {
  std::map<GroupKey, std::vector<const ExperimentResult*>> groups;
  for (const auto& r : results) groups[key_of(r)].push_back(&r);
  std::map<GroupKey, GroupStats> out;
  for (const auto& [key, members] : groups) {
    std::vector<double> acc, area, query;
    for (const auto* r : members) {
      acc.push_back(r->final_accuracy);
      area.push_back(r->auc);
      query.push_back(mean_query_seconds(*r));
    }
    out[key] = {summarize(acc), summarize(area), summarize(query)};
  }
  return out;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "' (expected csv or markdown)");
}

std::string format_fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
  return buffer;
}

std::string format_mean_sd(double mean, double sd, int decimals) {
  return format_fixed(mean, decimals) + "±" + format_fixed(sd, decimals);
}

namespace {

template <typename T>
void push_unique(std::vector<T>& items, const T& item) {
  if (std::find(items.begin(), items.end(), item) == items.end()) items.push_back(item);
}

struct Layout {
  std::vector<std::string> datasets;
  std::vector<std::string> models;
  std::vector<std::string> strategies;  // canonical pe, bt, lc, ca, rs order
};

Layout layout_of(std::span<const ExperimentResult> results) {
  Layout layout;
  for (const auto& r : results) {
    push_unique(layout.datasets, r.config.dataset_name);
    push_unique(layout.models, r.config.classifier.name());
  }
  for (const auto s : kAllStrategies) {
    const auto name = std::string(to_string(s));
    if (std::any_of(results.begin(), results.end(), [&](const auto& r) { return r.config.strategy == s; })) {
      layout.strategies.push_back(name);
    }
  }
  return layout;
}

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

struct SummaryRow {
  std::string model, strategy;
  double rank_acc, rank_auc, mean_acc, mean_auc;
};

std::vector<SummaryRow> summary_rows(const Layout& layout, const std::map<GroupKey, GroupStats>& stats) {
  std::vector<SummaryRow> rows;
  for (const auto& model : layout.models) {
    MetricTable acc, area;
    for (const auto& dataset : layout.datasets) {
      for (const auto& strategy : layout.strategies) {
        const auto it = stats.find({dataset, model, strategy});
        if (it == stats.end()) continue;
        acc[dataset][strategy] = it->second.final_accuracy.mean;
        area[dataset][strategy] = it->second.auc.mean;
      }
    }
    if (acc.empty()) continue;
    const auto rank_acc = mean_rank(acc);
    const auto rank_auc = mean_rank(area);
    for (const auto& strategy : layout.strategies) {
      if (!rank_acc.contains(strategy)) continue;
      double sum_acc = 0.0, sum_auc = 0.0;
      for (const auto& [dataset, values] : acc) sum_acc += values.at(strategy);
      for (const auto& [dataset, values] : area) sum_auc += values.at(strategy);
      const auto n = static_cast<double>(acc.size());
      rows.push_back({model, strategy, rank_acc.at(strategy), rank_auc.at(strategy), sum_acc / n, sum_auc / n});
    }
  }
  return rows;
}

enum class Metric { kAccuracy, kAuc, kQuerySeconds };

const Summary& pick(const GroupStats& s, Metric metric) {
  switch (metric) {
    case Metric::kAccuracy: return s.final_accuracy;
    case Metric::kAuc: return s.auc;
    case Metric::kQuerySeconds: return s.query_seconds;
  }
  return s.final_accuracy;
}

std::string markdown_metric_table(const Layout& layout, const std::map<GroupKey, GroupStats>& stats, Metric metric) {
  std::ostringstream out;
  out << "| Dataset | Model |";
  for (const auto& s : layout.strategies) out << ' ' << upper(s) << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < layout.strategies.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& dataset : layout.datasets) {
    for (const auto& model : layout.models) {
      bool any = false;
      std::ostringstream row;
      row << "| " << dataset << " | " << model << " |";
      for (const auto& strategy : layout.strategies) {
        const auto it = stats.find({dataset, model, strategy});
        if (it == stats.end()) {
          row << " - |";
        } else {
          any = true;
          const auto& s = pick(it->second, metric);
          row << ' ' << format_mean_sd(s.mean, s.sd) << " |";
        }
      }
      if (any) out << row.str() << '\n';
    }
  }
  return out.str();
}

std::string csv_metric_table(const Layout& layout, const std::map<GroupKey, GroupStats>& stats, Metric metric) {
  std::ostringstream out;
  out << "dataset,model,strategy,mean,sd,runs\n";
  for (const auto& dataset : layout.datasets) {
    for (const auto& model : layout.models) {
      for (const auto& strategy : layout.strategies) {
        const auto it = stats.find({dataset, model, strategy});
        if (it == stats.end()) continue;
        const auto& s = pick(it->second, metric);
        out << dataset << ',' << model << ',' << strategy << ',' << format_fixed(s.mean, 3) << ','
            << format_fixed(s.sd, 3) << ',' << s.count << '\n';
      }
    }
  }
  return out.str();
}

std::string curves_csv(std::span<const ExperimentResult> results) {
  std::ostringstream out;
  out << "run_id,iteration,num_labeled,accuracy\n";
  for (const auto& r : results) {
    const auto id = run_id(r);
    for (const auto& rec : r.records) {
      out << id << ',' << rec.iteration << ',' << rec.num_labeled << ',' << format_number(rec.test_accuracy) << '\n';
    }
  }
  return out.str();
}

}  // namespace

std::vector<ReportDocument> render_report(std::span<const ExperimentResult> results, ReportFormat format) {
  if (results.empty()) throw std::invalid_argument("cannot render a report without results");
  const auto layout = layout_of(results);
  const auto stats = aggregate(results);
  const auto rows = summary_rows(layout, stats);

  std::vector<ReportDocument> docs;
  if (format == ReportFormat::kMarkdown) {
    std::ostringstream md;
    md << "# Active learning report\n\n";
    md << "## Summary\n\n";
    md << "Mean rank by final accuracy and AUC across datasets (1 = best), and mean results.\n\n";
    md << "| Model | Strategy | Mean Rank Acc. | Mean Rank AUC | Mean Result Acc. | Mean Result AUC |\n";
    md << "|---|---|---:|---:|---:|---:|\n";
    for (const auto& row : rows) {
      md << "| " << row.model << " | " << upper(row.strategy) << " | " << format_fixed(row.rank_acc, 2) << " | "
         << format_fixed(row.rank_auc, 2) << " | " << format_fixed(row.mean_acc, 3) << " | "
         << format_fixed(row.mean_auc, 3) << " |\n";
    }
    md << "\n## Final accuracy (mean±sd over runs)\n\n" << markdown_metric_table(layout, stats, Metric::kAccuracy);
    md << "\n## Area under the learning curve (mean±sd over runs)\n\n"
       << markdown_metric_table(layout, stats, Metric::kAuc);
    md << "\n## Query time in seconds (mean±sd over runs)\n\n"
       << markdown_metric_table(layout, stats, Metric::kQuerySeconds);
    docs.push_back({"report.md", md.str()});
  } else {
    std::ostringstream summary;
    summary << "model,strategy,mean_rank_acc,mean_rank_auc,mean_acc,mean_auc\n";
    for (const auto& row : rows) {
      summary << row.model << ',' << row.strategy << ',' << format_fixed(row.rank_acc, 2) << ','
              << format_fixed(row.rank_auc, 2) << ',' << format_fixed(row.mean_acc, 3) << ','
              << format_fixed(row.mean_auc, 3) << '\n';
    }
    docs.push_back({"summary.csv", summary.str()});
    docs.push_back({"accuracy.csv", csv_metric_table(layout, stats, Metric::kAccuracy)});
    docs.push_back({"auc.csv", csv_metric_table(layout, stats, Metric::kAuc)});
    docs.push_back({"query_time.csv", csv_metric_table(layout, stats, Metric::kQuerySeconds)});
  }
  docs.push_back({"learning_curves.csv", curves_csv(results)});
  return docs;
}

}  // namespace al
