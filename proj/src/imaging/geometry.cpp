#include "forgeguard/imaging/geometry.hpp"

#include <algorithm>
#include <numeric>

#include "forgeguard/core/error.hpp"

namespace forgeguard::imaging {

double iou(const Box& a, const Box& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double overlap_threshold) {
  if (overlap_threshold < 0.0 || overlap_threshold > 1.0) {
    throw Error(ErrorKind::kInvalidArgument, "NMS overlap threshold must lie in [0, 1]");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return candidates[l].score > candidates[r].score;
  });

  std::vector<ScoredBox> kept;
  std::vector<bool> suppressed(candidates.size(), false);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t i = order[pos];
    if (suppressed[i]) continue;
    kept.push_back(candidates[i]);
    for (std::size_t next = pos + 1; next < order.size(); ++next) {
      const std::size_t j = order[next];
      if (!suppressed[j] && iou(candidates[i].box, candidates[j].box) > overlap_threshold) suppressed[j] = true;
    }
  }
  return kept;
}

Box clip(const Box& box, int width, int height) {
  const double x1 = std::clamp(box.x, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(box.y, 0.0, static_cast<double>(height));
  const double x2 = std::clamp(box.right(), 0.0, static_cast<double>(width));
  const double y2 = std::clamp(box.bottom(), 0.0, static_cast<double>(height));
  return {x1, y1, std::max(0.0, x2 - x1), std::max(0.0, y2 - y1)};
}

Box expand_margin(const Box& box, double fraction, int width, int height) {
  if (fraction < 0.0) throw Error(ErrorKind::kInvalidArgument, "margin fraction must be >= 0");
  const double dx = fraction * box.w;
  const double dy = fraction * box.h;
  return clip({box.x - dx, box.y - dy, box.w + 2.0 * dx, box.h + 2.0 * dy}, width, height);
}

double resize_rule(int width) {
  if (width < 1) throw Error(ErrorKind::kInvalidArgument, "width must be >= 1");
  if (width < 300) return 2.0;
  if (width < 1000) return 1.0;
  if (width < 1900) return 0.5;
  return 1.0 / 3.0;
}

}  // namespace forgeguard::imaging
