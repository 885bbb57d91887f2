#include "forgeguard/service/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "forgeguard/codec/codec.hpp"
#include "forgeguard/core/encoding.hpp"
#include "forgeguard/imaging/geometry.hpp"
#include "forgeguard/imaging/transform.hpp"

namespace forgeguard::service {

using nlohmann::ordered_json;

namespace {

std::string thumbnail(const imaging::ImageBuffer& crop) {
  const int side = std::max(crop.width(), crop.height());
  imaging::ImageBuffer small = crop;
  if (side > kThumbnailMaxSide) {
    const double s = static_cast<double>(kThumbnailMaxSide) / side;
    small = imaging::resample(crop, std::max(1, static_cast<int>(std::lround(crop.width() * s))),
                              std::max(1, static_cast<int>(std::lround(crop.height() * s))));
  }
  return base64_encode(codec::encode_image(small, codec::ImageFormat::kPng));
}

ordered_json box_json(const imaging::Box& b) { return {{"x", b.x}, {"y", b.y}, {"width", b.w}, {"height", b.h}}; }

ordered_json landmarks_json(const imaging::Landmarks& l) {
  auto p = [](const imaging::Point& q) { return ordered_json{{"x", q.x}, {"y", q.y}}; };
  return {{"left_eye", p(l.left_eye)},
          {"right_eye", p(l.right_eye)},
          {"nose", p(l.nose)},
          {"mouth_left", p(l.mouth_left)},
          {"mouth_right", p(l.mouth_right)}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace

DetectResponse handle_detect(const DetectRequest& request, const model_zoo::ClassifierModel& model,
                             const cascade::FaceDetector& detector, const cascade::RemoteServiceConfig& limits) {
  const auto image = cascade::validate_upload(request.image_bytes, request.declared_format, limits);
  DetectResponse r;
  r.detections = detector.detect(image);
  if (r.detections.empty()) {
    r.message = kNoFaceMessage;
    return r;
  }
  const auto best = std::max_element(r.detections.begin(), r.detections.end(),
                                     [](const auto& a, const auto& b) { return a.confidence < b.confidence; });
  const auto region = imaging::expand_margin(best->box, kCropMargin, image.width(), image.height());
  imaging::ImageBuffer face(1, 1, 3);
  try {
    face = imaging::crop(image, region);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerateCrop) throw;
    r.message = kNoFaceMessage;
    return r;
  }
  const auto probs = model.predict(face);
  std::size_t top = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[top]) top = i;
  }
  r.face_found = true;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    r.probabilities.emplace_back(model.class_names[i], probs[i]);
    if (model.class_names[i] == "real") r.real_probability = probs[i];
  }
  r.verdict = model.class_names[top];
  r.box = best->box;
  r.landmarks = best->landmarks;
  r.crop_thumbnail = thumbnail(face);
  return r;
}

std::string to_json(const DetectResponse& r) {
  ordered_json doc;
  doc["face_found"] = r.face_found;
  if (r.message) doc["message"] = *r.message;
  if (r.verdict) doc["verdict"] = *r.verdict;
  if (!r.probabilities.empty()) {
    ordered_json probs = ordered_json::object();
    for (const auto& [name, p] : r.probabilities) probs[name] = p;
    doc["probabilities"] = probs;
  }
  if (r.real_probability) doc["real_probability"] = *r.real_probability;
  if (r.box) doc["box"] = box_json(*r.box);
  if (r.landmarks) doc["landmarks"] = landmarks_json(*r.landmarks);
  if (r.crop_thumbnail) doc["crop_thumbnail"] = *r.crop_thumbnail;
  ordered_json dets = ordered_json::array();
  for (const auto& d : r.detections) {
    ordered_json j{{"box", box_json(d.box)}, {"confidence", d.confidence}};
    if (d.landmarks) j["landmarks"] = landmarks_json(*d.landmarks);
    dets.push_back(std::move(j));
  }
  doc["detections"] = std::move(dets);
  return doc.dump();
}

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kCodec:
    case ErrorKind::kImageTooSmall:
    case ErrorKind::kInvalidArgument: return 400;
    case ErrorKind::kPayloadTooLarge: return 413;
    case ErrorKind::kUnsupportedFormat: return 415;
    case ErrorKind::kNotReady: return 503;
    case ErrorKind::kRemoteService:
    case ErrorKind::kDetectionBackend: return 502;
    default: return 500;
  }
}

std::string error_json(const Error& error) {
  return ordered_json{{"error", std::string(to_string(error.kind()))}, {"message", error.what()}}.dump();
}

std::string log_line(const DetectResponse& r) {
  ordered_json doc;
  doc["timestamp"] = utc_timestamp();
  doc["face_found"] = r.face_found;
  if (r.verdict) doc["verdict"] = *r.verdict;
  if (!r.probabilities.empty()) {
    ordered_json probs = ordered_json::object();
    for (const auto& [name, p] : r.probabilities) probs[name] = p;
    doc["probabilities"] = probs;
  }
  return doc.dump();
}

DetectionLog::DetectionLog(std::filesystem::path path) : path_(std::move(path)) {}

bool DetectionLog::append(const DetectResponse& response) noexcept {
  try {
    const std::string line = log_line(response) + "\n";
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (out) return true;
  } catch (...) {
  }
  std::fprintf(stderr, "warning: could not append to detection log %s\n", path_.c_str());
  return false;
}

InferenceService::InferenceService(std::shared_ptr<const cascade::FaceDetector> detector,
                                   cascade::RemoteServiceConfig limits)
    : detector_(std::move(detector)), limits_(std::move(limits)) {
  if (!detector_) throw Error(ErrorKind::kInvalidArgument, "the service needs a face detector");
}

void InferenceService::load_checkpoint(const std::filesystem::path& checkpoint,
                                       std::optional<std::filesystem::path> registry_dir) {
  auto model = model_zoo::load_checkpoint(checkpoint, std::move(registry_dir));
  const auto sidecar = model_zoo::sidecar_path(checkpoint);
  std::ifstream in(sidecar);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  set_model(std::move(model), nlohmann::json::parse(text).dump());
}

void InferenceService::set_model(model_zoo::ClassifierModel model, std::string info_json) {
  auto next = std::make_shared<const LoadedModel>(LoadedModel{std::move(model), std::move(info_json)});
  std::unique_lock lock(mutex_);
  model_ = std::move(next);
}

void InferenceService::set_log(std::filesystem::path path) {
  std::unique_lock lock(mutex_);
  log_ = std::make_unique<DetectionLog>(std::move(path));
}

std::shared_ptr<const LoadedModel> InferenceService::current() const {
  std::shared_lock lock(mutex_);
  return model_;
}

bool InferenceService::model_loaded() const { return current() != nullptr; }

std::string InferenceService::handle_health() const {
  return ordered_json{{"status", "ok"}, {"model_loaded", model_loaded()}}.dump();
}

std::string InferenceService::handle_model_info() const {
  const auto m = current();
  if (!m) throw Error(ErrorKind::kNotReady, "no model is loaded");
  return m->info_json;
}

DetectResponse InferenceService::detect(const DetectRequest& request) const {
  const auto m = current();
  if (!m) throw Error(ErrorKind::kNotReady, "no model is loaded");
  auto response = handle_detect(request, m->model, *detector_, limits_);
  DetectionLog* log = nullptr;
  {
    std::shared_lock lock(mutex_);
    log = log_.get();
  }
  if (log) log->append(response);
  return response;
}

namespace {

constexpr const char* kIndexPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>forgeguard</title></head>
<body>
<h1>forgeguard</h1>
<form id="f"><input type="file" name="image" accept="image/*"> <button>Detect</button></form>
<pre id="out"></pre>
<script>
document.getElementById('f').onsubmit = async (e) => {
  e.preventDefault();
  const res = await fetch('/api/detect', {method: 'POST', body: new FormData(e.target)});
  document.getElementById('out').textContent = JSON.stringify(await res.json(), null, 2);
};
</script>
</body></html>
)";

std::string declared_format(const httplib::MultipartFormData& file) {
  if (!file.content_type.empty() && file.content_type != "application/octet-stream") return file.content_type;
  const auto ext = std::filesystem::path(file.filename).extension().string();
  return ext.empty() ? std::string() : ext.substr(1);
}

}  // namespace

struct HttpServer::Impl {
  InferenceService& service;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  Impl(InferenceService& s, ServerOptions o) : service(s), options(std::move(o)) {}

  void routes() {
    // Oversized uploads must reach the handler so they get a JSON 413.
    server.set_payload_max_length(64u << 20);
    auto reply_error = [](httplib::Response& res, const Error& e) {
      res.status = http_status(e.kind());
      res.set_content(error_json(e), "application/json");
    };
    server.Post("/api/detect", [this, reply_error](const httplib::Request& req, httplib::Response& res) {
      try {
        if (!req.has_file("image")) throw Error(ErrorKind::kInvalidArgument, "multipart field 'image' is required");
        const auto file = req.get_file_value("image");
        DetectRequest request{{file.content.begin(), file.content.end()}, declared_format(file)};
        res.set_content(to_json(service.detect(request)), "application/json");
      } catch (const Error& e) {
        reply_error(res, e);
      } catch (const std::exception& e) {
        reply_error(res, Error(ErrorKind::kIo, e.what()));
      }
    });
    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(service.handle_health(), "application/json");
    });
    server.Get("/api/model", [this, reply_error](const httplib::Request&, httplib::Response& res) {
      try {
        res.set_content(service.handle_model_info(), "application/json");
      } catch (const Error& e) {
        reply_error(res, e);
      }
    });
    if (options.static_dir) {
      if (!server.set_mount_point("/", options.static_dir->string())) {
        throw Error(ErrorKind::kIo, "static directory not found: " + options.static_dir->string());
      }
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kIndexPage, "text/html; charset=utf-8");
      });
    }
  }
};

HttpServer::HttpServer(InferenceService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) throw Error(ErrorKind::kIo, "cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

int HttpServer::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace forgeguard::service
