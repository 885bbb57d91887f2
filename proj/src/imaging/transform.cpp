#include "forgeguard/imaging/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "forgeguard/core/error.hpp"

namespace forgeguard::imaging {
namespace {

struct Tap {
  int lo;
  int hi;
  float frac;
};

// Source taps for each output coordinate, half-pixel centers, clamped.
std::vector<Tap> taps(int in_size, int out_size) {
  std::vector<Tap> result(static_cast<std::size_t>(out_size));
  const double ratio = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in_size - 1);
    result[static_cast<std::size_t>(i)] = {lo, hi, static_cast<float>(src - lo)};
  }
  return result;
}

void horizontal_pass(const ImageBuffer& image, int y, const std::vector<Tap>& xt, std::vector<float>& out) {
  const int c = image.channels();
  const std::uint8_t* src = image.row(y);
  for (std::size_t x = 0; x < xt.size(); ++x) {
    const Tap& t = xt[x];
    for (int ch = 0; ch < c; ++ch) {
      const float a = src[t.lo * c + ch];
      const float b = src[t.hi * c + ch];
      const float diff = b - a;
      const float scaled = diff * t.frac;
      out[x * c + ch] = a + scaled;
    }
  }
}

inline std::uint8_t round_pixel(float v) {
  // Round half away from zero; intensities are never negative here.
  const float r = std::floor(v + 0.5f);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0f, 255.0f));
}

}  // namespace

ImageBuffer resample(const ImageBuffer& image, int target_width, int target_height) {
  return resample(image, target_width, target_height, simd::active());
}

ImageBuffer resample(const ImageBuffer& image, int target_width, int target_height,
                     const simd::KernelTable& kernels) {
  if (target_width < 1 || target_height < 1) {
    throw Error(ErrorKind::kInvalidArgument, "resample target must be at least 1x1");
  }
  if (target_width == image.width() && target_height == image.height()) return image;

  const int c = image.channels();
  const auto xt = taps(image.width(), target_width);
  const auto yt = taps(image.height(), target_height);
  const std::size_t row_len = static_cast<std::size_t>(target_width) * c;

  std::vector<float> upper(row_len), lower(row_len), blended(row_len);
  int upper_src = -1;
  int lower_src = -1;
  ImageBuffer out(target_width, target_height, c);
  for (int y = 0; y < target_height; ++y) {
    const Tap& t = yt[static_cast<std::size_t>(y)];
    if (t.lo != upper_src) {
      if (t.lo == lower_src) {
        std::swap(upper, lower);
        std::swap(upper_src, lower_src);
      } else {
        horizontal_pass(image, t.lo, xt, upper);
        upper_src = t.lo;
      }
    }
    if (t.hi != lower_src) {
      horizontal_pass(image, t.hi, xt, lower);
      lower_src = t.hi;
    }
    kernels.lerp(upper.data(), lower.data(), t.frac, blended.data(), row_len);
    std::uint8_t* dst = out.row(y);
    for (std::size_t i = 0; i < row_len; ++i) dst[i] = round_pixel(blended[i]);
  }
  return out;
}

std::vector<double> pyramid_scales(int width, int height, double factor, int min_size) {
  if (!(factor > 0.0 && factor < 1.0)) throw Error(ErrorKind::kInvalidArgument, "pyramid factor must lie in (0, 1)");
  if (min_size < 1) throw Error(ErrorKind::kInvalidArgument, "pyramid min_size must be >= 1");
  std::vector<double> scales;
  double scale = 1.0;
  while (std::floor(std::min(width, height) * scale) >= min_size) {
    scales.push_back(scale);
    scale *= factor;
  }
  return scales;
}

std::vector<PyramidLevel> build_pyramid(const ImageBuffer& image, double factor, int min_size) {
  std::vector<PyramidLevel> levels;
  for (const double scale : pyramid_scales(image.width(), image.height(), factor, min_size)) {
    if (levels.empty()) {
      levels.push_back({scale, image});
      continue;
    }
    const int w = static_cast<int>(std::floor(image.width() * scale));
    const int h = static_cast<int>(std::floor(image.height() * scale));
    levels.push_back({scale, resample(image, w, h)});
  }
  return levels;
}

ImageBuffer crop(const ImageBuffer& image, const Box& box) {
  const int x1 = std::clamp(static_cast<int>(std::lround(box.x)), 0, image.width());
  const int y1 = std::clamp(static_cast<int>(std::lround(box.y)), 0, image.height());
  const int x2 = std::clamp(static_cast<int>(std::lround(box.right())), 0, image.width());
  const int y2 = std::clamp(static_cast<int>(std::lround(box.bottom())), 0, image.height());
  if (x2 - x1 < 1 || y2 - y1 < 1) {
    throw Error(ErrorKind::kDegenerateCrop, "crop region is empty after rounding and clipping");
  }
  const int c = image.channels();
  ImageBuffer out(x2 - x1, y2 - y1, c);
  for (int y = y1; y < y2; ++y) {
    const std::uint8_t* src = image.row(y) + static_cast<std::size_t>(x1) * c;
    std::copy(src, src + out.row_stride(), out.row(y - y1));
  }
  return out;
}

ImageBuffer crop_square_patch(const ImageBuffer& image, const Box& box, int size) {
  const long x1 = std::lround(box.x);
  const long y1 = std::lround(box.y);
  const long w = std::max(1L, std::lround(box.right()) - x1);
  const long h = std::max(1L, std::lround(box.bottom()) - y1);
  const int c = image.channels();
  ImageBuffer region(static_cast<int>(w), static_cast<int>(h), c);
  const long sx1 = std::max(0L, x1);
  const long sy1 = std::max(0L, y1);
  const long sx2 = std::min<long>(image.width(), x1 + w);
  const long sy2 = std::min<long>(image.height(), y1 + h);
  for (long y = sy1; y < sy2; ++y) {
    if (sx2 <= sx1) break;
    const std::uint8_t* src = image.row(static_cast<int>(y)) + sx1 * c;
    std::copy(src, src + (sx2 - sx1) * c, region.row(static_cast<int>(y - y1)) + (sx1 - x1) * c);
  }
  return resample(region, size, size);
}

ImageBuffer to_grayscale(const ImageBuffer& image) {
  if (image.channels() == 1) return image;
  ImageBuffer out(image.width(), image.height(), 1);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(image.luminance(x, y)));
    }
  }
  return out;
}

ImageBuffer to_rgb(const ImageBuffer& image) {
  if (image.channels() == 3) return image;
  ImageBuffer out(image.width(), image.height(), 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::uint8_t v = image.at(x, y);
      out.at(x, y, 0) = v;
      out.at(x, y, 1) = v;
      out.at(x, y, 2) = v;
    }
  }
  return out;
}

}  // namespace forgeguard::imaging
