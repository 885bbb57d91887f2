#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forgeguard/imaging/image.hpp"
#include "forgeguard/model_zoo/backbone.hpp"

namespace forgeguard::model_zoo {

// Frozen image -> feature vector map.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int input_size() const = 0;
  virtual int feature_width() const = 0;
  virtual std::int64_t param_count() const = 0;
  virtual std::string description() const = 0;
  // image is input_size() square RGB.
  virtual std::vector<float> features(const imaging::ImageBuffer& image) const = 0;
};

class ReferenceBackbone : public FeatureExtractor {
 public:
  ReferenceBackbone(BackboneArch arch, const WeightContainer& weights) : executor_(std::move(arch), weights) {}

  int input_size() const override { return executor_.arch().input.height; }
  int feature_width() const override { return executor_.arch().feature_width(); }
  std::int64_t param_count() const override { return executor_.arch().param_count(); }
  std::string description() const override { return executor_.arch().name; }
  std::vector<float> features(const imaging::ImageBuffer& image) const override { return executor_.features(image); }

 private:
  BackboneExecutor executor_;
};

// Offline stand-in with the variant's feature width: 8x8 downsample, fixed
// seeded random projection, ReLU. Deterministic for a given seed.
class StubBackbone : public FeatureExtractor {
 public:
  static constexpr int kGrid = 8;

  StubBackbone(int input_size, int feature_width, std::uint64_t seed);

  int input_size() const override { return input_size_; }
  int feature_width() const override { return width_; }
  std::int64_t param_count() const override { return static_cast<std::int64_t>(projection_.size()); }
  std::string description() const override { return "stub"; }
  std::vector<float> features(const imaging::ImageBuffer& image) const override;
  std::uint64_t seed() const { return seed_; }

 private:
  int input_size_;
  int width_;
  std::uint64_t seed_;
  std::vector<float> projection_;  // [kGrid * kGrid * 3][width]
};

struct DenseHead {
  int in_features = 0;
  int num_classes = 0;
  double dropout = 0.0;
  std::vector<float> weights;  // [in][out]
  std::vector<float> bias;

  std::int64_t param_count() const { return static_cast<std::int64_t>(in_features) * num_classes + num_classes; }
  std::vector<double> logits(std::span<const float> features) const;
};

// Class probabilities from head logits: softmax for K >= 3, and for K = 2 the
// sigmoid of the logit difference (identical to a two-way softmax).
std::vector<double> head_probabilities(std::span<const double> logits);

struct ParamCount {
  std::int64_t trainable = 0;
  std::int64_t non_trainable = 0;
  std::int64_t total = 0;
};

struct ClassifierModel {
  BackboneVariant variant = BackboneVariant::kEfficientNetB4;
  std::shared_ptr<const FeatureExtractor> backbone;
  DenseHead head;
  std::vector<std::string> class_names;
  Preprocessing preprocessing;

  int input_size() const { return backbone->input_size(); }
  int num_classes() const { return head.num_classes; }

  // Resizes to the backbone input and runs it.
  std::vector<float> extract(const imaging::ImageBuffer& image) const;
  std::vector<double> classify(std::span<const float> features) const;
  std::vector<double> predict(const imaging::ImageBuffer& image) const { return classify(extract(image)); }
};

enum class BackboneSource { kRegistry, kStub };

struct ClassifierOptions {
  BackboneSource source = BackboneSource::kRegistry;
  std::optional<std::filesystem::path> registry_dir;  // default_model_cache() when unset
  std::uint64_t seed = 0;                              // head init and stub projection
  double dropout = 0.4;                                // EfficientNet head only
  std::vector<std::string> class_names;                // default: class_0..class_{K-1}
};

// Default class order for K = 3 / K = 2 heads.
std::vector<std::string> default_class_names(int num_classes);

ClassifierModel build_classifier(BackboneVariant variant, int num_classes, const ClassifierOptions& options = {});

ParamCount count_params(const ClassifierModel& model);

// Reference-architecture accounting for a variant, no weights needed.
ParamCount reference_param_count(BackboneVariant variant, int num_classes);

// Writes path (weight container with the head and backbone source) and
// path with extension .json (metadata sidecar).
void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

// Rebuilds the backbone (from the registry, or the recorded stub) and the
// head. Throws Error(kLoad) on malformed files.
ClassifierModel load_checkpoint(const std::filesystem::path& path,
                                std::optional<std::filesystem::path> registry_dir = std::nullopt);

}  // namespace forgeguard::model_zoo
