#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace forgeguard::evaluation {

// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::int64_t>> counts;

  std::size_t size() const { return class_names.size(); }
  std::int64_t total() const;
  std::int64_t row_sum(std::size_t c) const;
  std::int64_t column_sum(std::size_t c) const;
  std::int64_t trace() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix zero_matrix(std::vector<std::string> class_names);

// Error(kLabel) for a label outside class_names.
ConfusionMatrix confusion(std::span<const std::pair<std::string, std::string>> pairs,
                          std::vector<std::string> class_names);
ConfusionMatrix confusion(std::span<const std::pair<int, int>> pairs, std::vector<std::string> class_names);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  ClassMetrics macro_avg;     // unweighted mean; support = total
  ClassMetrics weighted_avg;  // support-weighted mean; support = total
  std::int64_t total_support = 0;
  // Classes whose precision (empty predicted column) or recall (no support)
  // was defined as 0.
  std::vector<std::string> zero_division;
};

// 2pr / (p + r), 0 when both are 0.
double f1_score(double precision, double recall);

// Error(kEvaluation) when the matrix is empty.
EvalReport report(const ConfusionMatrix& matrix);

// {"per_class": {name: {precision, recall, f1, support}}, "accuracy",
//  "macro_avg", "weighted_avg", "total_support"[, "zero_division"]}
std::string report_json(const EvalReport& report, int indent = 2);

// Per-class rows, then accuracy, macro avg and weighted avg, 4 decimals.
std::string format_report(const EvalReport& report);

struct ReportedClass {
  std::string name;
  double recall = 0.0;
  std::int64_t support = 0;
};

struct Reconstruction {
  std::vector<std::int64_t> diagonal;  // round(recall * support)
  double accuracy = 0.0;               // sum(diagonal) / sum(support)
  bool consistent = false;
};

// Rebuilds the confusion diagonal from a published per-class table and
// checks it against the published accuracy. The default tolerance is half a
// unit in the fourth decimal.
Reconstruction reconstruct_counts(std::span<const ReportedClass> rows, double reported_accuracy,
                                  double tolerance = 5e-5);

}  // namespace forgeguard::evaluation
