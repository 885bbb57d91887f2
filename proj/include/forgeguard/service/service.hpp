#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "forgeguard/cascade/detector.hpp"
#include "forgeguard/cascade/remote.hpp"
#include "forgeguard/core/error.hpp"
#include "forgeguard/model_zoo/classifier.hpp"

namespace forgeguard::service {

inline constexpr const char* kNoFaceMessage = "No face found in the uploaded image.";
inline constexpr double kCropMargin = 0.30;
inline constexpr int kThumbnailMaxSide = 256;

struct DetectRequest {
  std::vector<std::uint8_t> image_bytes;
  std::string declared_format;  // codec name or MIME type; empty = sniff
};

struct DetectResponse {
  bool face_found = false;
  std::optional<std::string> message;
  std::optional<std::string> verdict;
  std::vector<std::pair<std::string, double>> probabilities;  // class order; empty without a face
  std::optional<double> real_probability;
  std::optional<imaging::Box> box;
  std::optional<imaging::Landmarks> landmarks;
  std::optional<std::string> crop_thumbnail;  // base64 PNG, longest side <= 256
  std::vector<cascade::FaceDetection> detections;
};

// Upload limits come from the same contract the remote provider enforces
// (JPEG/PNG/GIF/BMP, <= 4 MiB, both sides > 50 px) and are checked before the
// detector runs. The highest-confidence face is classified.
DetectResponse handle_detect(const DetectRequest& request, const model_zoo::ClassifierModel& model,
                             const cascade::FaceDetector& detector, const cascade::RemoteServiceConfig& limits = {});

std::string to_json(const DetectResponse& response);

// HTTP status for a library error: 400 bad image, 413, 415, 503 not ready,
// 502 detection backend, 500 otherwise.
int http_status(ErrorKind kind);
std::string error_json(const Error& error);

// Append-only JSON lines; no image bytes. Safe for concurrent writers.
class DetectionLog {
 public:
  explicit DetectionLog(std::filesystem::path path);
  // False (and a warning on stderr) when the line could not be written.
  bool append(const DetectResponse& response) noexcept;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

std::string log_line(const DetectResponse& response);

struct LoadedModel {
  model_zoo::ClassifierModel model;
  std::string info_json;  // the checkpoint sidecar
};

// Shared state behind the HTTP routes. The model can be swapped at runtime;
// requests in flight keep the model they started with.
class InferenceService {
 public:
  InferenceService(std::shared_ptr<const cascade::FaceDetector> detector, cascade::RemoteServiceConfig limits = {});

  void load_checkpoint(const std::filesystem::path& checkpoint,
                       std::optional<std::filesystem::path> registry_dir = std::nullopt);
  void set_model(model_zoo::ClassifierModel model, std::string info_json);
  void set_log(std::filesystem::path path);

  bool model_loaded() const;
  std::string handle_health() const;
  // Error(kNotReady) without a model.
  std::string handle_model_info() const;
  // Error(kNotReady) without a model; also logs the response.
  DetectResponse detect(const DetectRequest& request) const;

 private:
  std::shared_ptr<const LoadedModel> current() const;

  std::shared_ptr<const cascade::FaceDetector> detector_;
  cascade::RemoteServiceConfig limits_;
  mutable std::shared_mutex mutex_;
  std::shared_ptr<const LoadedModel> model_;
  std::unique_ptr<DetectionLog> log_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 = any free port
  std::optional<std::filesystem::path> static_dir;  // served at "/"; a built-in page otherwise
};

// POST /api/detect (multipart field "image"), GET /api/health, GET /api/model,
// static files at "/".
class HttpServer {
 public:
  HttpServer(InferenceService& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and returns the port; Error(kIo) when binding fails.
  int bind();
  // Blocks until stop().
  void listen();
  // bind() + listen() on a background thread.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace forgeguard::service
