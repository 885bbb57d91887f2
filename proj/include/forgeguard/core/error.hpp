#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forgeguard {

// Every failure the library reports carries one of these kinds; the service
// maps them onto HTTP status codes and the CLI onto exit codes.
enum class ErrorKind {
  kInvalidArgument,
  kDegenerateCrop,
  kCodec,
  kLoad,
  kRole,
  kDetectionBackend,
  kUnsupportedFormat,
  kPayloadTooLarge,
  kImageTooSmall,
  kRemoteService,
  kParse,
  kManifest,
  kConfiguration,
  kComposition,
  kInfeasible,
  kRegistry,
  kEvaluation,
  kLabel,
  kNotReady,
  kIo,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Remote-service failures also carry the HTTP status (0 for transport errors).
class RemoteServiceError : public Error {
 public:
  RemoteServiceError(int status, const std::string& message)
      : Error(ErrorKind::kRemoteService, message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace forgeguard
