#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "forgeguard/core/weight_container.hpp"
#include "forgeguard/imaging/image.hpp"
#include "forgeguard/model_zoo/scaling.hpp"
#include "forgeguard/nn/ops.hpp"

namespace forgeguard::model_zoo {

enum class BackboneVariant { kEfficientNetB4, kResNet50, kVgg16 };

std::string_view to_string(BackboneVariant variant);  // efficientnet_b4, resnet50, vgg16
std::optional<BackboneVariant> parse_variant(std::string_view name);

// Applied before the first layer, after any channel reorder:
//   x[c] = (pixel[c] * input_scale - mean[c]) * scale[c]
struct Preprocessing {
  bool bgr = false;
  float input_scale = 1.0f;
  std::array<float, 3> mean{};
  std::array<float, 3> scale{1.0f, 1.0f, 1.0f};

  friend bool operator==(const Preprocessing&, const Preprocessing&) = default;
};

enum class NodeOp { kInput, kZeroPad, kConv, kDepthwise, kBatchNorm, kActivation, kAdd, kMultiply, kGlobalAvgPool, kMaxPool };
enum class Activation { kNone, kRelu, kSwish, kSigmoid };

// One layer of a backbone graph. Names follow the Keras applications so
// exported weights map one to one.
struct Node {
  std::string name;
  NodeOp op = NodeOp::kInput;
  std::vector<int> inputs;
  int kernel = 0;
  int stride = 1;
  int filters = 0;
  int in_channels = 0;
  bool same = false;  // TF "same" padding, else unpadded
  bool bias = false;
  nn::Padding pad;    // kZeroPad only
  Activation act = Activation::kNone;
  float epsilon = 1e-3f;
  Shape3 out;
};

struct TensorShape {
  std::string role;
  std::vector<std::uint32_t> dims;
};

// A frozen feature extractor: a layer DAG in topological order ending in a
// global average pool.
struct BackboneArch {
  std::string name;
  Shape3 input;
  Preprocessing preprocessing;
  std::vector<Node> nodes;
  // Non-learned entries a framework counts as parameters (input
  // normalization state); part of the non-trainable total.
  std::int64_t state_params = 0;

  int feature_width() const { return nodes.back().out.channels; }
  std::int64_t learned_params() const;
  std::int64_t param_count() const { return learned_params() + state_params; }
};

// Parameter tensors of a node, in Keras get_weights() order.
std::vector<TensorShape> param_shapes(const Node& node);

struct EfficientNetBlockArgs {
  int kernel;
  int repeats;
  int filters_in;
  int filters_out;
  int expand_ratio;
  int stride;
  double se_ratio;
};

struct EfficientNetConfig {
  double width = 1.0;
  double depth = 1.0;
  int resolution = 224;
  std::vector<EfficientNetBlockArgs> blocks;  // empty: the standard seven
  int stem_filters = 32;
  int top_filters = 1280;
};

struct ResNetStack {
  int filters;
  int blocks;
  int stride;
};

struct ResNetConfig {
  int resolution = 224;
  int stem_filters = 64;
  std::vector<ResNetStack> stacks;
};

struct VggConfig {
  int resolution = 224;
  std::vector<std::pair<int, int>> blocks;  // (conv count, filters)
};

BackboneArch efficientnet_arch(const EfficientNetConfig& config);
BackboneArch resnet_arch(const ResNetConfig& config);
BackboneArch vgg_arch(const VggConfig& config);

// The three reference constructions: B4 at 380, ResNet-50 and VGG-16 at 128.
BackboneArch reference_arch(BackboneVariant variant);

// EfficientNet-B0 stage table as a NetworkSpec (for the scaling search).
NetworkSpec efficientnet_b0_spec();

// Deterministic He-style initialization (BN as identity), handy for tests
// and for exercising the executor without pretrained weights.
WeightContainer random_backbone_weights(const BackboneArch& arch, std::uint64_t seed);

// Executes an arch with a validated weight set. Immutable after construction.
class BackboneExecutor {
 public:
  // Throws Error(kLoad) naming the layer whose tensors are missing or
  // mis-shaped.
  BackboneExecutor(BackboneArch arch, const WeightContainer& weights);

  const BackboneArch& arch() const { return arch_; }

  // image must already be arch().input sized RGB.
  std::vector<float> features(const imaging::ImageBuffer& image) const;

 private:
  struct Prepared {
    std::vector<float> a;  // kernel or BN scale
    std::vector<float> b;  // bias or BN shift
  };
  BackboneArch arch_;
  std::vector<Prepared> params_;
  std::vector<int> last_use_;
};

}  // namespace forgeguard::model_zoo
