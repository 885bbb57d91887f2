#pragma once

// Metrics computed straight from (true, predicted) pairs, never via a matrix.

#include <utility>
#include <vector>

namespace oracle {

struct PairMetrics {
  double precision = 0, recall = 0, f1 = 0;
  long support = 0;
};

inline PairMetrics class_metrics(const std::vector<std::pair<int, int>>& pairs, int c) {
  long tp = 0, fp = 0, fn = 0;
  for (const auto& [t, p] : pairs) {
    if (t == c && p == c) ++tp;
    else if (p == c) ++fp;
    else if (t == c) ++fn;
  }
  PairMetrics m;
  m.support = tp + fn;
  m.precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
  m.recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
  m.f1 = tp ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0;
  return m;
}

inline double fraction_correct(const std::vector<std::pair<int, int>>& pairs) {
  long hit = 0;
  for (const auto& [t, p] : pairs) hit += t == p;
  return double(hit) / double(pairs.size());
}

}  // namespace oracle
