#include "forgeguard/core/error.hpp"

namespace forgeguard {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDegenerateCrop: return "degenerate-crop";
    case ErrorKind::kCodec: return "codec";
    case ErrorKind::kLoad: return "load";
    case ErrorKind::kRole: return "role";
    case ErrorKind::kDetectionBackend: return "detection-backend";
    case ErrorKind::kUnsupportedFormat: return "unsupported-format";
    case ErrorKind::kPayloadTooLarge: return "payload-too-large";
    case ErrorKind::kImageTooSmall: return "image-too-small";
    case ErrorKind::kRemoteService: return "remote-service";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kManifest: return "manifest";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kComposition: return "composition";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kRegistry: return "registry";
    case ErrorKind::kEvaluation: return "evaluation";
    case ErrorKind::kLabel: return "label";
    case ErrorKind::kNotReady: return "not-ready";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace forgeguard
