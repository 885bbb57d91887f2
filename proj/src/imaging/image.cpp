#include "forgeguard/imaging/image.hpp"

#include <algorithm>
#include <string>

#include "forgeguard/core/error.hpp"

namespace forgeguard::imaging {
namespace {

void check_dims(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "image dimensions must be >= 1, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorKind::kInvalidArgument, "image must have 1 or 3 channels, got " + std::to_string(channels));
  }
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  pixels_.assign(static_cast<std::size_t>(width) * height * channels, 0);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  check_dims(width, height, channels);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorKind::kInvalidArgument, "pixel buffer size does not match width x height x channels");
  }
}

ImageBuffer ImageBuffer::filled(int width, int height, int channels, std::uint8_t value) {
  ImageBuffer image(width, height, channels);
  std::fill(image.pixels_.begin(), image.pixels_.end(), value);
  return image;
}

double ImageBuffer::luminance(int x, int y) const noexcept {
  const std::uint8_t* p = row(y) + x * channels_;
  if (channels_ == 1) return p[0];
  return (static_cast<double>(p[0]) + p[1] + p[2]) / 3.0;
}

}  // namespace forgeguard::imaging
