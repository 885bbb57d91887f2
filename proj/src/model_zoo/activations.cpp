#include "forgeguard/model_zoo/activations.hpp"

#include <algorithm>
#include <cmath>

#include "forgeguard/core/error.hpp"

namespace forgeguard::model_zoo {

double relu(double x) { return x > 0.0 ? x : 0.0; }

double sigmoid(double x) {
  // Branch so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorKind::kInvalidArgument, "softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

}  // namespace forgeguard::model_zoo
