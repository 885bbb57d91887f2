#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "forgeguard/imaging/image.hpp"

namespace forgeguard::codec {

enum class ImageFormat { kJpeg, kPng, kGif, kBmp };

std::string_view to_string(ImageFormat format);

// Accepts "jpeg"/"jpg", "png", "gif", "bmp" and MIME types like "image/png",
// case-insensitively.
std::optional<ImageFormat> parse_format(std::string_view name);

// Identifies the container from its magic bytes.
std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes);

// Decodes JPEG/PNG/BMP/GIF bytes into a 3-channel RGB buffer. GIF yields the
// first frame. Throws Error(kCodec) on anything undecodable.
imaging::ImageBuffer decode_image(std::span<const std::uint8_t> bytes);
imaging::ImageBuffer read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_image(const imaging::ImageBuffer& image, ImageFormat format,
                                       int jpeg_quality = 95);
void write_png(const imaging::ImageBuffer& image, const std::filesystem::path& path);

// First frame of a GIF; exposed for testing the decoder on its own.
imaging::ImageBuffer decode_gif(std::span<const std::uint8_t> bytes);

// Sequential frame access for video containers.
class VideoReader {
 public:
  explicit VideoReader(const std::filesystem::path& path);
  ~VideoReader();
  VideoReader(VideoReader&&) noexcept;
  VideoReader& operator=(VideoReader&&) noexcept;

  // Next frame in temporal order, or nullopt at end of stream.
  std::optional<imaging::ImageBuffer> next();

  // Advances past a frame without converting it.
  bool skip();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Writes an MJPEG AVI; used to produce fixtures.
void write_video(const std::filesystem::path& path, std::span<const imaging::ImageBuffer> frames, double fps = 25.0);

bool is_video_path(const std::filesystem::path& path);
bool is_image_path(const std::filesystem::path& path);

}  // namespace forgeguard::codec
