#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "forgeguard/model_zoo/scaling.hpp"

namespace oracle {

// Hand-rolled conv-stage accounting for a single-stage chain.
inline std::int64_t conv_macs(int k, int c_in, int c_out, int h, int w, int repeats) {
  return static_cast<std::int64_t>(repeats) * h * w * c_out * k * k * c_in;
}

// Exhaustive search: evaluate every grid point, keep the best feasible one
// under (score desc, flops asc, index asc).
inline std::optional<std::size_t> best_grid_index(const forgeguard::model_zoo::NetworkSpec& base,
                                                  const forgeguard::model_zoo::ResourceBudget& budget,
                                                  const std::vector<forgeguard::model_zoo::ScalingCoefficients>& grid,
                                                  const forgeguard::model_zoo::SpecScore& score) {
  using namespace forgeguard::model_zoo;
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto spec = apply_scaling(base, grid[i]);
    if (estimate_flops(spec) <= budget.target_flops && estimate_memory(spec) <= budget.target_memory) {
      feasible.push_back(i);
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t i : feasible) {
    if (!best) {
      best = i;
      continue;
    }
    const auto a = apply_scaling(base, grid[i]);
    const auto b = apply_scaling(base, grid[*best]);
    const double sa = score(a), sb = score(b);
    if (sa > sb || (sa == sb && estimate_flops(a) < estimate_flops(b))) best = i;
  }
  return best;
}

}  // namespace oracle
