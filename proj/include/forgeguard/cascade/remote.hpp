#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "forgeguard/cascade/detector.hpp"
#include "forgeguard/codec/codec.hpp"

namespace forgeguard::cascade {

struct RemoteServiceConfig {
  std::string endpoint;  // full URL, e.g. https://host/face/v1.0/detect?returnFaceLandmarks=true
  std::string api_key;
  double timeout_seconds = 10.0;
  std::set<codec::ImageFormat> allowed_formats{codec::ImageFormat::kJpeg, codec::ImageFormat::kPng,
                                               codec::ImageFormat::kGif, codec::ImageFormat::kBmp};
  std::size_t max_bytes = 4u << 20;
  int min_dim = 50;  // both sides must exceed this
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string content_type;
  std::string body;
  double timeout_seconds = 10.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// The one seam between the client and the network; tests substitute a
// recording double.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws RemoteServiceError(0, ...) when no response was received.
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport();

// Local checks the remote provider would otherwise reject: declared format in
// allowed_formats (kUnsupportedFormat), size <= max_bytes (kPayloadTooLarge),
// decoded width and height > min_dim (kImageTooSmall). Returns the decoded
// image. Shared with the service, which applies the same contract.
imaging::ImageBuffer validate_upload(std::span<const std::uint8_t> bytes, std::string_view declared_format,
                                     const RemoteServiceConfig& config);

// Maps a provider response body to detections. The expected schema is a JSON
// array of {"faceRectangle": {"top","left","width","height"},
// "faceLandmarks": {"pupilLeft","pupilRight","noseTip","mouthLeft",
// "mouthRight": {"x","y"}}}; landmarks are optional, confidence is 1.
std::vector<FaceDetection> parse_remote_response(const std::string& body);

// Validates, then issues exactly one POST with the raw bytes
// (application/octet-stream) and the key in Ocp-Apim-Subscription-Key. Non-2xx
// statuses raise RemoteServiceError carrying the status.
std::vector<FaceDetection> remote_detect(std::span<const std::uint8_t> image_bytes, std::string_view format,
                                         const RemoteServiceConfig& config, HttpTransport& transport);

// FaceDetector adapter: encodes the frame as JPEG and calls remote_detect.
class RemoteDetector : public FaceDetector {
 public:
  RemoteDetector(RemoteServiceConfig config, std::shared_ptr<HttpTransport> transport);
  std::vector<FaceDetection> detect(const imaging::ImageBuffer& image) const override;

 private:
  RemoteServiceConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

}  // namespace forgeguard::cascade
