#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace forgeguard::model_zoo {

struct Shape3 {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::int64_t volume() const { return static_cast<std::int64_t>(height) * width * channels; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

enum class OperatorKind {
  kConv,   // k x k convolution, C_in -> C_out
  kBlock,  // residual / inverted-bottleneck block, accounted like a conv of its kernel
  kPool,   // k x k pooling, channels pass through
};

struct OperatorSpec {
  OperatorKind kind = OperatorKind::kConv;
  int kernel = 1;
  int stride = 1;
  // Declared input channels; 0 means "whatever the previous stage emits".
  int in_channels = 0;
  std::string name;

  friend bool operator==(const OperatorSpec&, const OperatorSpec&) = default;
};

struct StageSpec {
  OperatorSpec op;
  int repeats = 1;
  Shape3 out_shape;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct NetworkSpec {
  std::vector<StageSpec> stages;
  Shape3 input_shape;

  // Shape entering stage i (the input for i == 0).
  Shape3 stage_input(std::size_t i) const { return i == 0 ? input_shape : stages[i - 1].out_shape; }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct ScalingCoefficients {
  double depth = 1.0;
  double width = 1.0;
  double resolution = 1.0;

  friend bool operator==(const ScalingCoefficients&, const ScalingCoefficients&) = default;
};

struct ResourceBudget {
  std::int64_t target_memory = 0;  // bytes
  std::int64_t target_flops = 0;   // multiply-accumulates
};

// Checks the channel chain (declared inputs, pools preserving channels) and
// that no stage grows the spatial extent. Errors name both offending stages.
NetworkSpec compose_network(std::vector<StageSpec> stages, Shape3 input_shape);

// EfficientNet-style channel rounding to a multiple of divisor, never more
// than 10% below the scaled value.
int round_filters(double channels, int divisor = 8);

// repeats' = ceil(d L), channels' = round_filters(w C), spatial' = round(r H),
// input resolution scaled by r (input channels untouched).
NetworkSpec apply_scaling(const NetworkSpec& base, const ScalingCoefficients& c);

// Multiply-accumulates: conv and block stages count
// repeats * H_out * W_out * C_out * k^2 * C_in, pools repeats * H_out * W_out * C * k^2.
std::int64_t estimate_flops(const NetworkSpec& spec);

// Conv and block weights (repeats * k^2 * C_in * C_out, no bias), pools none.
std::int64_t estimate_params(const NetworkSpec& spec);

// float32 bytes: 4 * (parameters + largest stage output H * W * C).
std::int64_t estimate_memory(const NetworkSpec& spec);

using SpecScore = std::function<double(const NetworkSpec&)>;

// Proxy for accuracy: fraction of the FLOP budget used.
SpecScore flops_utilization(const ResourceBudget& budget);

struct ScalingChoice {
  ScalingCoefficients coefficients;
  NetworkSpec spec;
  std::int64_t flops = 0;
  std::int64_t memory = 0;
  double score = 0.0;
};

// Best-scoring grid point within both budgets; ties go to fewer FLOPs, then
// grid order. Throws Error(kInfeasible) naming the tightest constraint when
// nothing fits.
ScalingChoice search_scaling(const NetworkSpec& base, const ResourceBudget& budget,
                             const std::vector<ScalingCoefficients>& grid, const SpecScore& score);

}  // namespace forgeguard::model_zoo
