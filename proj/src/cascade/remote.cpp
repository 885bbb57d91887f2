#include "forgeguard/cascade/remote.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <regex>

#include "forgeguard/core/error.hpp"

namespace forgeguard::cascade {

using imaging::ImageBuffer;
using nlohmann::json;

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(request.url, m, url_re)) {
      throw RemoteServiceError(0, "malformed endpoint URL '" + request.url + "'");
    }
    httplib::Client client(m[1].str());
    const auto secs = static_cast<time_t>(request.timeout_seconds);
    const auto usecs = static_cast<time_t>((request.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    const std::string path = m[2].matched ? m[2].str() : "/";
    auto res = client.Post(path, headers, request.body, request.content_type);
    if (!res) throw RemoteServiceError(0, "remote service unreachable: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }
};

double number_field(const json& obj, const char* key, const char* where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw RemoteServiceError(200, std::string("remote response: ") + where + "." + key + " missing or not a number");
  }
  return obj[key].get<double>();
}

imaging::Point point_field(const json& lm, const char* key) {
  if (!lm.contains(key) || !lm[key].is_object()) {
    throw RemoteServiceError(200, std::string("remote response: faceLandmarks.") + key + " missing");
  }
  return {number_field(lm[key], "x", key), number_field(lm[key], "y", key)};
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

ImageBuffer validate_upload(std::span<const std::uint8_t> bytes, std::string_view declared_format,
                            const RemoteServiceConfig& config) {
  const auto format = declared_format.empty() ? codec::sniff_format(bytes) : codec::parse_format(declared_format);
  if (!format || config.allowed_formats.count(*format) == 0) {
    const std::string name = declared_format.empty() ? "unrecognized" : std::string(declared_format);
    throw Error(ErrorKind::kUnsupportedFormat, "unsupported image format '" + name + "' (allowed: JPEG, PNG, GIF, BMP)");
  }
  if (bytes.size() > config.max_bytes) {
    throw Error(ErrorKind::kPayloadTooLarge, "image is " + std::to_string(bytes.size()) + " bytes; the limit is " +
                                                 std::to_string(config.max_bytes));
  }
  if (bytes.empty()) throw Error(ErrorKind::kCodec, "empty image payload");
  ImageBuffer image = codec::decode_image(bytes);
  if (image.width() <= config.min_dim || image.height() <= config.min_dim) {
    throw Error(ErrorKind::kImageTooSmall, "image is " + std::to_string(image.width()) + "x" +
                                               std::to_string(image.height()) + "; both sides must exceed " +
                                               std::to_string(config.min_dim) + " px");
  }
  return image;
}

std::vector<FaceDetection> parse_remote_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw RemoteServiceError(200, std::string("remote response is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw RemoteServiceError(200, "remote response: expected a JSON array of faces");
  std::vector<FaceDetection> out;
  for (const auto& face : doc) {
    if (!face.is_object() || !face.contains("faceRectangle")) {
      throw RemoteServiceError(200, "remote response: face entry without faceRectangle");
    }
    const auto& r = face["faceRectangle"];
    FaceDetection d;
    d.box = {number_field(r, "left", "faceRectangle"), number_field(r, "top", "faceRectangle"),
             number_field(r, "width", "faceRectangle"), number_field(r, "height", "faceRectangle")};
    d.confidence = 1.0;
    if (face.contains("faceLandmarks") && face["faceLandmarks"].is_object()) {
      const auto& lm = face["faceLandmarks"];
      d.landmarks = imaging::Landmarks{point_field(lm, "pupilLeft"), point_field(lm, "pupilRight"),
                                       point_field(lm, "noseTip"), point_field(lm, "mouthLeft"),
                                       point_field(lm, "mouthRight")};
    }
    out.push_back(d);
  }
  return out;
}

std::vector<FaceDetection> remote_detect(std::span<const std::uint8_t> image_bytes, std::string_view format,
                                         const RemoteServiceConfig& config, HttpTransport& transport) {
  validate_upload(image_bytes, format, config);
  if (config.endpoint.empty()) throw Error(ErrorKind::kConfiguration, "remote endpoint is not configured");
  HttpRequest request;
  request.url = config.endpoint;
  request.headers = {{"Ocp-Apim-Subscription-Key", config.api_key}};
  request.content_type = "application/octet-stream";
  request.body.assign(reinterpret_cast<const char*>(image_bytes.data()), image_bytes.size());
  request.timeout_seconds = config.timeout_seconds;
  const HttpResponse response = transport.post(request);
  if (response.status < 200 || response.status >= 300) {
    throw RemoteServiceError(response.status, "remote service returned HTTP " + std::to_string(response.status));
  }
  return parse_remote_response(response.body);
}

RemoteDetector::RemoteDetector(RemoteServiceConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (!transport_) throw Error(ErrorKind::kInvalidArgument, "remote detector needs a transport");
}

std::vector<FaceDetection> RemoteDetector::detect(const ImageBuffer& image) const {
  const auto bytes = codec::encode_image(image, codec::ImageFormat::kJpeg, 95);
  return remote_detect(bytes, "jpeg", config_, *transport_);
}

}  // namespace forgeguard::cascade
