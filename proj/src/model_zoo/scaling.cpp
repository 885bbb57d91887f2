#include "forgeguard/model_zoo/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "forgeguard/core/error.hpp"

namespace forgeguard::model_zoo {

namespace {

std::string stage_label(const NetworkSpec& spec, std::size_t i) {
  const auto& name = spec.stages[i].op.name;
  return "stage " + std::to_string(i) + (name.empty() ? "" : " (" + name + ")");
}

std::string shape_text(const Shape3& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

}  // namespace

NetworkSpec compose_network(std::vector<StageSpec> stages, Shape3 input_shape) {
  if (stages.empty()) throw Error(ErrorKind::kComposition, "a network needs at least one stage");
  if (input_shape.height < 1 || input_shape.width < 1 || input_shape.channels < 1) {
    throw Error(ErrorKind::kComposition, "input shape " + shape_text(input_shape) + " has an empty dimension");
  }
  NetworkSpec spec{std::move(stages), input_shape};
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& s = spec.stages[i];
    const Shape3 in = spec.stage_input(i);
    const std::string prev = i == 0 ? std::string("the input") : stage_label(spec, i - 1);
    if (s.repeats < 1) throw Error(ErrorKind::kComposition, stage_label(spec, i) + " has repeats < 1");
    if (s.op.kernel < 1 || s.op.stride < 1) {
      throw Error(ErrorKind::kComposition, stage_label(spec, i) + " has a non-positive kernel or stride");
    }
    if (s.out_shape.height < 1 || s.out_shape.width < 1 || s.out_shape.channels < 1) {
      throw Error(ErrorKind::kComposition, stage_label(spec, i) + " has an empty output dimension");
    }
    if (s.op.in_channels != 0 && s.op.in_channels != in.channels) {
      throw Error(ErrorKind::kComposition, stage_label(spec, i) + " declares " + std::to_string(s.op.in_channels) +
                                               " input channels but " + prev + " emits " +
                                               std::to_string(in.channels));
    }
    if (s.op.kind == OperatorKind::kPool && s.out_shape.channels != in.channels) {
      throw Error(ErrorKind::kComposition, stage_label(spec, i) + " pools " + std::to_string(in.channels) +
                                               " channels from " + prev + " into " +
                                               std::to_string(s.out_shape.channels));
    }
    if (s.out_shape.height > in.height || s.out_shape.width > in.width) {
      throw Error(ErrorKind::kComposition, stage_label(spec, i) + " output " + shape_text(s.out_shape) +
                                               " is larger than " + prev + " output " + shape_text(in));
    }
  }
  return spec;
}

int round_filters(double channels, int divisor) {
  int rounded = std::max(divisor, static_cast<int>(channels + divisor / 2.0) / divisor * divisor);
  if (rounded < 0.9 * channels) rounded += divisor;
  return rounded;
}

NetworkSpec apply_scaling(const NetworkSpec& base, const ScalingCoefficients& c) {
  if (!(c.depth > 0 && c.width > 0 && c.resolution > 0)) {
    throw Error(ErrorKind::kInvalidArgument, "scaling coefficients must be positive");
  }
  auto spatial = [&](int v) { return std::max(1, static_cast<int>(std::lround(c.resolution * v))); };
  NetworkSpec out = base;
  out.input_shape.height = spatial(base.input_shape.height);
  out.input_shape.width = spatial(base.input_shape.width);
  for (std::size_t i = 0; i < out.stages.size(); ++i) {
    auto& s = out.stages[i];
    const auto& b = base.stages[i];
    s.repeats = static_cast<int>(std::ceil(c.depth * b.repeats));
    s.out_shape.height = spatial(b.out_shape.height);
    s.out_shape.width = spatial(b.out_shape.width);
    // Pools keep whatever arrives; everything else rounds its own width.
    s.out_shape.channels = b.op.kind == OperatorKind::kPool ? out.stage_input(i).channels
                                                            : round_filters(c.width * b.out_shape.channels);
    if (s.op.in_channels != 0) s.op.in_channels = out.stage_input(i).channels;
  }
  return out;
}

std::int64_t estimate_flops(const NetworkSpec& spec) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& s = spec.stages[i];
    const std::int64_t k2 = static_cast<std::int64_t>(s.op.kernel) * s.op.kernel;
    if (s.op.kind == OperatorKind::kPool) {
      total += s.repeats * s.out_shape.volume() * k2;
    } else {
      total += s.repeats * s.out_shape.volume() * k2 * spec.stage_input(i).channels;
    }
  }
  return total;
}

std::int64_t estimate_params(const NetworkSpec& spec) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& s = spec.stages[i];
    if (s.op.kind == OperatorKind::kPool) continue;
    total += static_cast<std::int64_t>(s.repeats) * s.op.kernel * s.op.kernel * spec.stage_input(i).channels *
             s.out_shape.channels;
  }
  return total;
}

std::int64_t estimate_memory(const NetworkSpec& spec) {
  std::int64_t peak = 0;
  for (const auto& s : spec.stages) peak = std::max(peak, s.out_shape.volume());
  return 4 * (estimate_params(spec) + peak);
}

SpecScore flops_utilization(const ResourceBudget& budget) {
  return [budget](const NetworkSpec& spec) {
    return static_cast<double>(estimate_flops(spec)) / static_cast<double>(budget.target_flops);
  };
}

ScalingChoice search_scaling(const NetworkSpec& base, const ResourceBudget& budget,
                             const std::vector<ScalingCoefficients>& grid, const SpecScore& score) {
  if (grid.empty()) throw Error(ErrorKind::kInvalidArgument, "scaling grid is empty");
  if (budget.target_flops <= 0 || budget.target_memory <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "resource budget must be positive");
  }
  std::optional<ScalingChoice> best;
  // Closest miss, for the infeasibility report.
  double least_overshoot = std::numeric_limits<double>::infinity();
  std::string tightest;
  for (const auto& c : grid) {
    ScalingChoice cand{c, apply_scaling(base, c), 0, 0, 0.0};
    cand.flops = estimate_flops(cand.spec);
    cand.memory = estimate_memory(cand.spec);
    const double flop_ratio = static_cast<double>(cand.flops) / budget.target_flops;
    const double mem_ratio = static_cast<double>(cand.memory) / budget.target_memory;
    if (flop_ratio > 1.0 || mem_ratio > 1.0) {
      const double overshoot = std::max(flop_ratio, mem_ratio);
      if (overshoot < least_overshoot) {
        least_overshoot = overshoot;
        tightest = flop_ratio >= mem_ratio
                       ? "flops (" + std::to_string(cand.flops) + " > " + std::to_string(budget.target_flops) + ")"
                       : "memory (" + std::to_string(cand.memory) + " > " + std::to_string(budget.target_memory) +
                             " bytes)";
      }
      continue;
    }
    cand.score = score(cand.spec);
    if (!best || cand.score > best->score || (cand.score == best->score && cand.flops < best->flops)) {
      best = std::move(cand);
    }
  }
  if (!best) {
    throw Error(ErrorKind::kInfeasible, "no scaling in the grid fits the budget; tightest constraint: " + tightest);
  }
  return *best;
}

}  // namespace forgeguard::model_zoo
