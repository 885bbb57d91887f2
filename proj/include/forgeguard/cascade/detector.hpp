#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "forgeguard/cascade/stage.hpp"
#include "forgeguard/imaging/image.hpp"
#include "forgeguard/imaging/transform.hpp"

namespace forgeguard::cascade {

struct FaceDetection {
  imaging::Box box;
  double confidence = 0.0;
  std::optional<imaging::Landmarks> landmarks;

  friend bool operator==(const FaceDetection&, const FaceDetection&) = default;
};

struct CascadeConfig {
  std::array<double, 3> thresholds{0.6, 0.7, 0.95};
  std::array<double, 3> nms_thresholds{0.7, 0.7, 0.7};
  double pyramid_factor = imaging::kPyramidFactor;
  int min_size = imaging::kPyramidMinSize;
  int proposal_stride = 2;
  // Apply the proposal stage's own box offsets before refinement. Off by
  // default: the proposal stage only nominates windows.
  bool regress_proposals = false;
};

struct StageSet {
  std::shared_ptr<const StageBackend> proposal;
  std::shared_ptr<const StageBackend> refine;
  std::shared_ptr<const StageBackend> output;
};

// Loads <dir>/proposal.fgw, refine.fgw and output.fgw.
StageSet load_stage_set(const std::filesystem::path& dir);
void save_stage_set(const StageSet& stages, const std::filesystem::path& dir);

// Three marker-rule stages; see MarkerStageBackend.
StageSet marker_stage_set(MarkerStageBackend::Options options = {});

// Smallest square sharing the box's center that contains it. Square boxes are
// returned unchanged.
imaging::Box square_box(const imaging::Box& box);

// Intermediate results, exposed for pipeline-composition checks.
struct CascadeTrace {
  std::vector<imaging::ScoredBox> proposals;
  std::vector<imaging::ScoredBox> refined;
};

// Pyramid -> proposal scan + NMS -> refine (24x24) + regression + NMS ->
// output (48x48) + regression + landmarks + NMS. Result is sorted by
// descending confidence. Backend failures surface as Error(kDetectionBackend).
std::vector<FaceDetection> detect_faces(const imaging::ImageBuffer& image, const StageSet& stages,
                                        const CascadeConfig& config = {}, CascadeTrace* trace = nullptr);

// Anything that can find faces in a decoded image.
class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::vector<FaceDetection> detect(const imaging::ImageBuffer& image) const = 0;
};

class CascadeDetector : public FaceDetector {
 public:
  explicit CascadeDetector(StageSet stages, CascadeConfig config = {});
  std::vector<FaceDetection> detect(const imaging::ImageBuffer& image) const override;

 private:
  StageSet stages_;
  CascadeConfig config_;
};

}  // namespace forgeguard::cascade
