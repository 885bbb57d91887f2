#include "forgeguard/cascade/detector.hpp"

#include <algorithm>
#include <string>

#include "forgeguard/core/error.hpp"
#include "forgeguard/imaging/geometry.hpp"

namespace forgeguard::cascade {

using imaging::Box;
using imaging::ImageBuffer;
using imaging::ScoredBox;

namespace {

const char* kStageFiles[] = {"proposal.fgw", "refine.fgw", "output.fgw"};

void check_stage(const std::shared_ptr<const StageBackend>& stage, StageRole role) {
  if (!stage) throw Error(ErrorKind::kInvalidArgument, "missing " + std::string(to_string(role)) + " stage");
  if (stage->role() != role) {
    throw Error(ErrorKind::kRole, "backend with role '" + std::string(to_string(stage->role())) +
                                      "' supplied for the " + std::string(to_string(role)) + " stage");
  }
}

void check_ratio(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::kInvalidArgument, std::string(what) + " must lie in [0, 1]");
}

// Runs a backend call, converting any failure into a detection-backend error.
template <typename F>
auto guarded(StageRole role, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDetectionBackend) throw;
    throw Error(ErrorKind::kDetectionBackend, std::string(to_string(role)) + " stage failed: " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kDetectionBackend, std::string(to_string(role)) + " stage failed: " + e.what());
  }
}

struct Candidate {
  ScoredBox scored;
  std::optional<imaging::Landmarks> landmarks;
};

// Re-scores boxes with a later stage; returns survivors after NMS.
std::vector<Candidate> rescore(const ImageBuffer& image, const std::vector<ScoredBox>& boxes,
                               const StageBackend& stage, double threshold, double nms_threshold) {
  std::vector<Candidate> kept;
  const int size = stage.input_size();
  for (const auto& sb : boxes) {
    const Box region = square_box(sb.box);
    const auto out = guarded(stage.role(), [&] { return stage.evaluate(imaging::crop_square_patch(image, region, size)); });
    if (!(out.classifier >= threshold)) continue;
    Candidate c;
    c.scored = {apply_box_regression(region, out.bbox_regress), std::clamp(out.classifier, 0.0, 1.0)};
    if (out.landmark_regress) c.landmarks = decode_landmarks(region, *out.landmark_regress);
    kept.push_back(c);
  }
  std::vector<ScoredBox> scored;
  scored.reserve(kept.size());
  for (const auto& c : kept) scored.push_back(c.scored);
  const auto survivors = imaging::nms(scored, nms_threshold);

  // nms returns copies; map them back to their candidates (first unused
  // match, which is the one nms kept since it is stable).
  std::vector<Candidate> result;
  std::vector<bool> used(kept.size(), false);
  for (const auto& s : survivors) {
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (!used[i] && kept[i].scored == s) {
        used[i] = true;
        result.push_back(kept[i]);
        break;
      }
    }
  }
  return result;
}

}  // namespace

Box square_box(const Box& box) {
  if (box.w == box.h) return box;
  const double side = std::max(box.w, box.h);
  return {box.x + 0.5 * box.w - 0.5 * side, box.y + 0.5 * box.h - 0.5 * side, side, side};
}

StageSet load_stage_set(const std::filesystem::path& dir) {
  return {load_stage_weights(dir / kStageFiles[0], StageRole::kProposal),
          load_stage_weights(dir / kStageFiles[1], StageRole::kRefine),
          load_stage_weights(dir / kStageFiles[2], StageRole::kOutput)};
}

void save_stage_set(const StageSet& stages, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  check_stage(stages.proposal, StageRole::kProposal);
  check_stage(stages.refine, StageRole::kRefine);
  check_stage(stages.output, StageRole::kOutput);
  save_stage_weights(*stages.proposal, dir / kStageFiles[0]);
  save_stage_weights(*stages.refine, dir / kStageFiles[1]);
  save_stage_weights(*stages.output, dir / kStageFiles[2]);
}

StageSet marker_stage_set(MarkerStageBackend::Options options) {
  return {std::make_shared<MarkerStageBackend>(StageRole::kProposal, options),
          std::make_shared<MarkerStageBackend>(StageRole::kRefine, options),
          std::make_shared<MarkerStageBackend>(StageRole::kOutput, options)};
}

std::vector<FaceDetection> detect_faces(const ImageBuffer& image, const StageSet& stages, const CascadeConfig& config,
                                        CascadeTrace* trace) {
  check_stage(stages.proposal, StageRole::kProposal);
  check_stage(stages.refine, StageRole::kRefine);
  check_stage(stages.output, StageRole::kOutput);
  for (double t : config.thresholds) check_ratio(t, "stage threshold");
  for (double t : config.nms_thresholds) check_ratio(t, "NMS threshold");
  if (config.proposal_stride < 1) throw Error(ErrorKind::kInvalidArgument, "proposal stride must be >= 1");

  // Stage 1: dense scan over the pyramid.
  const StageBackend& pnet = *stages.proposal;
  const double window = pnet.input_size();
  std::vector<ScoredBox> raw;
  for (const auto& level : imaging::build_pyramid(image, config.pyramid_factor, config.min_size)) {
    const auto cells = guarded(pnet.role(), [&] { return pnet.scan(level.image, config.proposal_stride); });
    for (const auto& cell : cells) {
      if (!(cell.output.classifier >= config.thresholds[0])) continue;
      Box box{cell.x / level.scale, cell.y / level.scale, window / level.scale, window / level.scale};
      if (config.regress_proposals) box = apply_box_regression(box, cell.output.bbox_regress);
      raw.push_back({box, std::clamp(cell.output.classifier, 0.0, 1.0)});
    }
  }
  auto proposals = imaging::nms(raw, config.nms_thresholds[0]);
  if (trace) trace->proposals = proposals;

  // Stage 2.
  const auto refined = rescore(image, proposals, *stages.refine, config.thresholds[1], config.nms_thresholds[1]);
  std::vector<ScoredBox> refined_boxes;
  for (const auto& c : refined) refined_boxes.push_back(c.scored);
  if (trace) trace->refined = refined_boxes;

  // Stage 3.
  const auto final_candidates =
      rescore(image, refined_boxes, *stages.output, config.thresholds[2], config.nms_thresholds[2]);
  std::vector<FaceDetection> detections;
  for (const auto& c : final_candidates) detections.push_back({c.scored.box, c.scored.score, c.landmarks});
  return detections;
}

CascadeDetector::CascadeDetector(StageSet stages, CascadeConfig config)
    : stages_(std::move(stages)), config_(config) {
  check_stage(stages_.proposal, StageRole::kProposal);
  check_stage(stages_.refine, StageRole::kRefine);
  check_stage(stages_.output, StageRole::kOutput);
}

std::vector<FaceDetection> CascadeDetector::detect(const ImageBuffer& image) const {
  return detect_faces(image, stages_, config_);
}

}  // namespace forgeguard::cascade
