#pragma once

#include <span>
#include <vector>

#include "forgeguard/imaging/image.hpp"

namespace forgeguard::imaging {

// Intersection over union; 0 when disjoint or either box has zero area.
double iou(const Box& a, const Box& b);

// Greedy non-maximum suppression. Keeps the best remaining box and drops
// every remaining box whose IoU with it exceeds overlap_threshold. Equal
// scores keep input order. Output is in descending score order.
std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double overlap_threshold);

// Grows the box by fraction * w left and right and fraction * h top and
// bottom, then clips to [0, width] x [0, height].
Box expand_margin(const Box& box, double fraction, int width, int height);

Box clip(const Box& box, int width, int height);

// Frame scale factor by source width:
//   [1, 300) -> 2, [300, 1000) -> 1, [1000, 1900) -> 1/2, [1900, inf) -> 1/3
double resize_rule(int width);

}  // namespace forgeguard::imaging
