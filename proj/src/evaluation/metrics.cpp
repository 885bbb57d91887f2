#include "forgeguard/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "forgeguard/core/error.hpp"

namespace forgeguard::evaluation {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::int64_t t = 0;
  for (auto v : counts[c]) t += v;
  return t;
}

std::int64_t ConfusionMatrix::column_sum(std::size_t c) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[c];
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

ConfusionMatrix zero_matrix(std::vector<std::string> class_names) {
  if (class_names.empty()) throw Error(ErrorKind::kInvalidArgument, "a confusion matrix needs at least one class");
  const auto k = class_names.size();
  return {std::move(class_names), std::vector<std::vector<std::int64_t>>(k, std::vector<std::int64_t>(k, 0))};
}

ConfusionMatrix confusion(std::span<const std::pair<std::string, std::string>> pairs,
                          std::vector<std::string> class_names) {
  auto m = zero_matrix(std::move(class_names));
  auto index = [&](const std::string& label) {
    const auto it = std::find(m.class_names.begin(), m.class_names.end(), label);
    if (it == m.class_names.end()) throw Error(ErrorKind::kLabel, "unknown label '" + label + "'");
    return static_cast<std::size_t>(it - m.class_names.begin());
  };
  for (const auto& [truth, predicted] : pairs) ++m.counts[index(truth)][index(predicted)];
  return m;
}

ConfusionMatrix confusion(std::span<const std::pair<int, int>> pairs, std::vector<std::string> class_names) {
  auto m = zero_matrix(std::move(class_names));
  const int k = static_cast<int>(m.size());
  for (const auto& [truth, predicted] : pairs) {
    if (truth < 0 || truth >= k || predicted < 0 || predicted >= k) {
      throw Error(ErrorKind::kLabel, "label index out of range: (" + std::to_string(truth) + ", " +
                                         std::to_string(predicted) + ")");
    }
    ++m.counts[truth][predicted];
  }
  return m;
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

EvalReport report(const ConfusionMatrix& matrix) {
  const std::int64_t total = matrix.total();
  if (total <= 0) throw Error(ErrorKind::kEvaluation, "cannot report on an empty confusion matrix");
  EvalReport r;
  r.class_names = matrix.class_names;
  r.total_support = total;
  const double k = static_cast<double>(matrix.size());
  for (std::size_t c = 0; c < matrix.size(); ++c) {
    ClassMetrics m;
    const auto tp = static_cast<double>(matrix.counts[c][c]);
    const auto predicted = matrix.column_sum(c);
    m.support = matrix.row_sum(c);
    m.precision = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = m.support > 0 ? tp / static_cast<double>(m.support) : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    if (predicted == 0 || m.support == 0) r.zero_division.push_back(matrix.class_names[c]);
    r.per_class.push_back(m);

    const double w = static_cast<double>(m.support) / static_cast<double>(total);
    r.macro_avg.precision += m.precision / k;
    r.macro_avg.recall += m.recall / k;
    r.macro_avg.f1 += m.f1 / k;
    r.weighted_avg.precision += m.precision * w;
    r.weighted_avg.recall += m.recall * w;
    r.weighted_avg.f1 += m.f1 * w;
  }
  r.macro_avg.support = r.weighted_avg.support = total;
  r.accuracy = static_cast<double>(matrix.trace()) / static_cast<double>(total);
  return r;
}

namespace {

nlohmann::json metrics_json(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

}  // namespace

std::string report_json(const EvalReport& report, int indent) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    per_class[report.class_names[c]] = metrics_json(report.per_class[c]);
  }
  doc["per_class"] = per_class;
  doc["accuracy"] = report.accuracy;
  doc["macro_avg"] = metrics_json(report.macro_avg);
  doc["weighted_avg"] = metrics_json(report.weighted_avg);
  doc["total_support"] = report.total_support;
  if (!report.zero_division.empty()) doc["zero_division"] = report.zero_division;
  return doc.dump(indent);
}

std::string format_report(const EvalReport& report) {
  std::size_t width = std::string("weighted avg").size();
  for (const auto& name : report.class_names) width = std::max(width, name.size());
  const int w = static_cast<int>(width);
  char line[512];
  std::string out;
  std::snprintf(line, sizeof line, "%*s %10s %10s %10s %10s\n", w, "", "precision", "recall", "f1-score", "support");
  out += line;
  auto row = [&](const std::string& name, const ClassMetrics& m) {
    std::snprintf(line, sizeof line, "%*s %10.4f %10.4f %10.4f %10lld\n", w, name.c_str(), m.precision, m.recall,
                  m.f1, static_cast<long long>(m.support));
    out += line;
  };
  for (std::size_t c = 0; c < report.per_class.size(); ++c) row(report.class_names[c], report.per_class[c]);
  out += "\n";
  std::snprintf(line, sizeof line, "%*s %10s %10s %10.4f %10lld\n", w, "accuracy", "", "", report.accuracy,
                static_cast<long long>(report.total_support));
  out += line;
  row("macro avg", report.macro_avg);
  row("weighted avg", report.weighted_avg);
  if (!report.zero_division.empty()) {
    out += "\nzero-division (metric set to 0):";
    for (const auto& name : report.zero_division) out += " " + name;
    out += "\n";
  }
  return out;
}

Reconstruction reconstruct_counts(std::span<const ReportedClass> rows, double reported_accuracy, double tolerance) {
  Reconstruction r;
  std::int64_t hits = 0, support = 0;
  for (const auto& row : rows) {
    const auto d = static_cast<std::int64_t>(std::llround(row.recall * static_cast<double>(row.support)));
    r.diagonal.push_back(d);
    hits += d;
    support += row.support;
  }
  r.accuracy = support > 0 ? static_cast<double>(hits) / static_cast<double>(support) : 0.0;
  r.consistent = support > 0 && std::abs(r.accuracy - reported_accuracy) <= tolerance;
  return r;
}

}  // namespace forgeguard::evaluation
