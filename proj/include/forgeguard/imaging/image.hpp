#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace forgeguard::imaging {

// Row-major interleaved 8-bit image, RGB order when channels == 3.
class ImageBuffer {
 public:
  ImageBuffer(int width, int height, int channels);
  ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> pixels);

  static ImageBuffer filled(int width, int height, int channels, std::uint8_t value);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  std::size_t row_stride() const noexcept { return static_cast<std::size_t>(width_) * channels_; }
  const std::uint8_t* row(int y) const noexcept { return pixels_.data() + row_stride() * y; }
  std::uint8_t* row(int y) noexcept { return pixels_.data() + row_stride() * y; }

  std::uint8_t at(int x, int y, int c = 0) const noexcept { return row(y)[x * channels_ + c]; }
  std::uint8_t& at(int x, int y, int c = 0) noexcept { return row(y)[x * channels_ + c]; }

  // Mean over channels at (x, y).
  double luminance(int x, int y) const noexcept;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<std::uint8_t> pixels_;
};

// Axis-aligned box; (x, y) is the top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  double area() const noexcept { return w * h; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct ScoredBox {
  Box box;
  double score = 0.0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Landmarks {
  Point left_eye;
  Point right_eye;
  Point nose;
  Point mouth_left;
  Point mouth_right;

  friend bool operator==(const Landmarks&, const Landmarks&) = default;
};

}  // namespace forgeguard::imaging
