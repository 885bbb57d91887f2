#pragma once

#include <span>
#include <vector>

namespace forgeguard::model_zoo {

double relu(double x);
double sigmoid(double x);

// Max-subtracted exponential normalization.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace forgeguard::model_zoo
