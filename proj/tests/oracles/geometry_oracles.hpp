#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "forgeguard/imaging/image.hpp"

namespace oracle {

using forgeguard::imaging::Box;
using forgeguard::imaging::ImageBuffer;
using forgeguard::imaging::ScoredBox;

// Corner-form overlap, written without reusing the library's helpers.
inline double corner_iou(const Box& a, const Box& b) {
  const double ax1 = a.x, ay1 = a.y, ax2 = a.x + a.w, ay2 = a.y + a.h;
  const double bx1 = b.x, by1 = b.y, bx2 = b.x + b.w, by2 = b.y + b.h;
  const double ix = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double iy = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = ix * iy;
  const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  if (a.w <= 0 || a.h <= 0 || b.w <= 0 || b.h <= 0 || uni <= 0) return 0.0;
  return inter / uni;
}

// O(n^2) greedy NMS: repeatedly scan for the best remaining box (first in
// input order on ties), keep it, and filter the rest against it.
inline std::vector<ScoredBox> brute_force_nms(const std::vector<ScoredBox>& input, double threshold) {
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < input.size(); ++i) remaining.push_back(i);
  std::vector<ScoredBox> kept;
  while (!remaining.empty()) {
    std::size_t best_pos = 0;
    for (std::size_t p = 1; p < remaining.size(); ++p) {
      if (input[remaining[p]].score > input[remaining[best_pos]].score) best_pos = p;
    }
    const std::size_t best = remaining[best_pos];
    kept.push_back(input[best]);
    std::vector<std::size_t> next;
    for (std::size_t idx : remaining) {
      if (idx != best && corner_iou(input[best].box, input[idx].box) <= threshold) next.push_back(idx);
    }
    remaining = std::move(next);
  }
  return kept;
}

// Number of k >= 0 with floor(min_dim * factor^k) >= min_size.
inline int pyramid_level_count(int width, int height, double factor, int min_size) {
  const int min_dim = std::min(width, height);
  int count = 0;
  for (int k = 0;; ++k) {
    if (std::floor(min_dim * std::pow(factor, k)) < min_size) break;
    ++count;
  }
  return count;
}

inline ImageBuffer gradient_image(int width, int height, int channels) {
  ImageBuffer img(width, height, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x + 2 * y + 50 * c) % 256);
    }
  }
  return img;
}

inline Box random_box(std::mt19937& rng, double extent = 100.0, double max_side = 50.0) {
  std::uniform_real_distribution<double> pos(0.0, extent);
  std::uniform_real_distribution<double> side(0.0, max_side);
  return {pos(rng), pos(rng), side(rng), side(rng)};
}

// Random boxes clustered so that overlaps are common, with scores drawn from
// a small set so ties occur.
inline std::vector<ScoredBox> random_candidates(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> pos(0.0, 40.0);
  std::uniform_real_distribution<double> side(5.0, 30.0);
  std::uniform_int_distribution<int> score_step(0, 10);
  std::vector<ScoredBox> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({{pos(rng), pos(rng), side(rng), side(rng)}, score_step(rng) / 10.0});
  }
  return out;
}

}  // namespace oracle
