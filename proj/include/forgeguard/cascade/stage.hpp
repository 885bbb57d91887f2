#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "forgeguard/core/weight_container.hpp"
#include "forgeguard/imaging/image.hpp"

namespace forgeguard::cascade {

enum class StageRole { kProposal, kRefine, kOutput };

std::string_view to_string(StageRole role);
std::optional<StageRole> parse_role(std::string_view name);

// Square patch side each stage consumes: 12, 24, 48.
int input_size(StageRole role);

struct StageOutput {
  double classifier = 0.0;
  // Corner offsets (dx1, dy1, dx2, dy2) as fractions of the patch box.
  std::array<double, 4> bbox_regress{};
  // (x, y) pairs for left eye, right eye, nose, mouth left, mouth right, as
  // fractions of the patch box. Output stage only.
  std::optional<std::array<double, 10>> landmark_regress;
};

// One proposal-stage response at a window position (in level pixels).
struct ScanCell {
  int x = 0;
  int y = 0;
  StageOutput output;
};

class StageBackend {
 public:
  virtual ~StageBackend() = default;

  virtual StageRole role() const = 0;
  int input_size() const { return cascade::input_size(role()); }

  // patch is input_size() x input_size(), RGB. Must be deterministic and safe
  // to call concurrently.
  virtual StageOutput evaluate(const imaging::ImageBuffer& patch) const = 0;

  // Dense evaluation of every input_size() window whose top-left corner lies
  // on the stride grid. The default crops and evaluates each window;
  // convolutional backends override it.
  virtual std::vector<ScanCell> scan(const imaging::ImageBuffer& image, int stride) const;

  // Serialized form understood by load_stage_weights.
  virtual WeightContainer to_container() const = 0;
};

// x1' = x1 + dx1 * w, y1' = y1 + dy1 * h, x2' = x2 + dx2 * w, y2' = y2 + dy2 * h;
// corners are reordered if they cross.
imaging::Box apply_box_regression(const imaging::Box& box, const std::array<double, 4>& offsets);

// Landmark fractions mapped into the pixel frame of box.
imaging::Landmarks decode_landmarks(const imaging::Box& box, const std::array<double, 10>& fractions);

// Deterministic rule-based backend for tests and fixtures. It treats pixels
// with mean intensity >= bright_threshold as "marker" pixels and answers
// "face" when the marker covers the patch center while leaving the border
// ring (side / 24 px, at least 1) dark:
//   score = bright fraction of the central half * (1 - bright fraction of ring)
// With regression enabled the offsets move the box so the marker's bounding
// box occupies kMarkerFill of each side, centered. Output-role instances can
// emit a fixed landmark template.
class MarkerStageBackend : public StageBackend {
 public:
  static constexpr double kMarkerFill = 0.85;

  struct Options {
    int bright_threshold = 128;
    bool regress = true;
    bool landmarks = true;
  };

  MarkerStageBackend(StageRole role, Options options);
  explicit MarkerStageBackend(StageRole role) : MarkerStageBackend(role, Options{}) {}

  StageRole role() const override { return role_; }
  StageOutput evaluate(const imaging::ImageBuffer& patch) const override;
  WeightContainer to_container() const override;

  const Options& options() const { return options_; }

 private:
  StageRole role_;
  Options options_;
};

// Landmark template emitted by MarkerStageBackend, as box fractions.
inline constexpr std::array<double, 10> kMarkerLandmarks{0.30, 0.35, 0.70, 0.35, 0.50, 0.55, 0.35, 0.75, 0.65, 0.75};

// Layer kinds of a stage network inside the weight container. The container
// tag is "cascade/<role>". Layers run in file order over an NHWC activation;
// head layers all read the trunk output (flattened) and are applied last.
enum class StageLayerKind : std::uint32_t {
  kInputScale = 1,  // tensor [2] = {offset, scale}: x = (pixel - offset) * scale
  kConv2d = 2,      // attrs {stride}; tensors kernel [kh][kw][in][out], bias [out]
  kPrelu = 3,       // tensor alpha [channels]
  kMaxPool = 4,     // attrs {kernel, stride}; ceil mode
  kDense = 5,       // tensors weights [in][out], bias [out]; flattens NHWC input
  kHead = 6,        // attrs {0 = classifier (2 logits), 1 = box (4), 2 = landmarks (10)}; dense params
  kMarkerRule = 7,  // attrs {bright_threshold, regress, landmarks}
};

// Convolutional stage network interpreted from a weight container. When the
// trunk is purely convolutional (no dense layers) scan() runs it once over
// the whole image instead of window by window.
class NetworkStageBackend : public StageBackend {
 public:
  explicit NetworkStageBackend(WeightContainer container);

  StageRole role() const override { return role_; }
  StageOutput evaluate(const imaging::ImageBuffer& patch) const override;
  std::vector<ScanCell> scan(const imaging::ImageBuffer& image, int stride) const override;
  WeightContainer to_container() const override { return container_; }

  // Product of conv and pool strides; the natural scan stride.
  int native_stride() const { return native_stride_; }

 private:
  struct Head;
  StageRole role_;
  WeightContainer container_;
  bool fully_convolutional_ = true;
  int native_stride_ = 1;
};

void save_stage_weights(const StageBackend& backend, const std::filesystem::path& path);

// Reads a stage file and checks that it declares expected_role. Throws
// Error(kLoad) naming the offending field on malformed input and Error(kRole)
// on a role mismatch.
std::shared_ptr<const StageBackend> load_stage_weights(const std::filesystem::path& path, StageRole expected_role);
std::shared_ptr<const StageBackend> stage_from_container(const WeightContainer& container, StageRole expected_role);

}  // namespace forgeguard::cascade
