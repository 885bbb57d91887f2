#include "forgeguard/codec/codec.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

#include "forgeguard/core/encoding.hpp"
#include "forgeguard/core/error.hpp"
#include "forgeguard/imaging/transform.hpp"

namespace forgeguard::codec {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

imaging::ImageBuffer from_bgr_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  if (bgr.channels() == 1) {
    cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
  } else if (bgr.channels() == 4) {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
  } else {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  }
  if (rgb.depth() != CV_8U) rgb.convertTo(rgb, CV_8U);
  if (!rgb.isContinuous()) rgb = rgb.clone();
  std::vector<std::uint8_t> pixels(rgb.data, rgb.data + rgb.total() * rgb.elemSize());
  return imaging::ImageBuffer(rgb.cols, rgb.rows, 3, std::move(pixels));
}

cv::Mat to_bgr_mat(const imaging::ImageBuffer& image) {
  const int type = image.channels() == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat view(image.height(), image.width(), type, const_cast<std::uint8_t*>(image.pixels().data()));
  cv::Mat out;
  if (image.channels() == 3) {
    cv::cvtColor(view, out, cv::COLOR_RGB2BGR);
  } else {
    out = view.clone();
  }
  return out;
}

}  // namespace

std::string_view to_string(ImageFormat format) {
  switch (format) {
    case ImageFormat::kJpeg: return "JPEG";
    case ImageFormat::kPng: return "PNG";
    case ImageFormat::kGif: return "GIF";
    case ImageFormat::kBmp: return "BMP";
  }
  return "unknown";
}

std::optional<ImageFormat> parse_format(std::string_view name) {
  std::string n = lower(name);
  if (n.rfind("image/", 0) == 0) n = n.substr(6);
  if (!n.empty() && n.front() == '.') n = n.substr(1);
  if (n == "jpeg" || n == "jpg" || n == "pjpeg") return ImageFormat::kJpeg;
  if (n == "png") return ImageFormat::kPng;
  if (n == "gif") return ImageFormat::kGif;
  if (n == "bmp" || n == "x-ms-bmp" || n == "x-bmp") return ImageFormat::kBmp;
  return std::nullopt;
}

std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> b) {
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return ImageFormat::kJpeg;
  if (b.size() >= 8 && std::memcmp(b.data(), "\x89PNG\r\n\x1a\n", 8) == 0) return ImageFormat::kPng;
  if (b.size() >= 6 && (std::memcmp(b.data(), "GIF87a", 6) == 0 || std::memcmp(b.data(), "GIF89a", 6) == 0)) {
    return ImageFormat::kGif;
  }
  if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return ImageFormat::kBmp;
  return std::nullopt;
}

imaging::ImageBuffer decode_image(std::span<const std::uint8_t> bytes) {
  const auto format = sniff_format(bytes);
  if (!format) throw Error(ErrorKind::kCodec, "unrecognized image encoding");
  if (*format == ImageFormat::kGif) return decode_gif(bytes);
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat decoded;
  try {
    decoded = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::kCodec, std::string("image decode failed: ") + e.what());
  }
  if (decoded.empty()) throw Error(ErrorKind::kCodec, "image decode failed");
  return from_bgr_mat(decoded);
}

imaging::ImageBuffer read_image(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const Error&) {
    throw Error(ErrorKind::kCodec, "cannot read image " + path.string());
  }
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(ErrorKind::kCodec, path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_image(const imaging::ImageBuffer& image, ImageFormat format, int jpeg_quality) {
  std::string ext;
  std::vector<int> params;
  switch (format) {
    case ImageFormat::kJpeg:
      ext = ".jpg";
      params = {cv::IMWRITE_JPEG_QUALITY, jpeg_quality};
      break;
    case ImageFormat::kPng: ext = ".png"; break;
    case ImageFormat::kBmp: ext = ".bmp"; break;
    case ImageFormat::kGif: throw Error(ErrorKind::kUnsupportedFormat, "GIF encoding is not supported");
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(ext, to_bgr_mat(image), out, params)) {
    throw Error(ErrorKind::kCodec, "image encode failed");
  }
  return out;
}

void write_png(const imaging::ImageBuffer& image, const std::filesystem::path& path) {
  const auto bytes = encode_image(image, ImageFormat::kPng);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

struct VideoReader::Impl {
  cv::VideoCapture capture;
};

VideoReader::VideoReader(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::kCodec, "video not found: " + path.string());
  impl_->capture.open(path.string());
  if (!impl_->capture.isOpened()) throw Error(ErrorKind::kCodec, "cannot decode video " + path.string());
}

VideoReader::~VideoReader() = default;
VideoReader::VideoReader(VideoReader&&) noexcept = default;
VideoReader& VideoReader::operator=(VideoReader&&) noexcept = default;

std::optional<imaging::ImageBuffer> VideoReader::next() {
  cv::Mat frame;
  if (!impl_->capture.read(frame) || frame.empty()) return std::nullopt;
  return from_bgr_mat(frame);
}

bool VideoReader::skip() { return impl_->capture.grab(); }

void write_video(const std::filesystem::path& path, std::span<const imaging::ImageBuffer> frames, double fps) {
  if (frames.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot write a video with no frames");
  const cv::Size size(frames.front().width(), frames.front().height());
  cv::VideoWriter writer(path.string(), cv::VideoWriter::fourcc('M', 'J', 'P', 'G'), fps, size);
  if (!writer.isOpened()) throw Error(ErrorKind::kCodec, "cannot open video writer for " + path.string());
  for (const auto& frame : frames) {
    if (frame.width() != size.width || frame.height() != size.height) {
      throw Error(ErrorKind::kInvalidArgument, "video frames must share one size");
    }
    writer.write(to_bgr_mat(imaging::to_rgb(frame)));
  }
}

bool is_video_path(const std::filesystem::path& path) {
  const auto ext = lower(path.extension().string());
  return ext == ".avi" || ext == ".mp4" || ext == ".mov" || ext == ".mkv" || ext == ".webm" || ext == ".m4v";
}

bool is_image_path(const std::filesystem::path& path) {
  return parse_format(path.extension().string()).has_value();
}

}  // namespace forgeguard::codec
