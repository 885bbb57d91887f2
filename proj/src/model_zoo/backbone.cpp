#include "forgeguard/model_zoo/backbone.hpp"

#include <cmath>
#include <optional>
#include <random>

#include "forgeguard/core/error.hpp"
#include "forgeguard/simd/kernels.hpp"

namespace forgeguard::model_zoo {

std::string_view to_string(BackboneVariant variant) {
  switch (variant) {
    case BackboneVariant::kEfficientNetB4: return "efficientnet_b4";
    case BackboneVariant::kResNet50: return "resnet50";
    case BackboneVariant::kVgg16: return "vgg16";
  }
  return "unknown";
}

std::optional<BackboneVariant> parse_variant(std::string_view name) {
  for (auto v : {BackboneVariant::kEfficientNetB4, BackboneVariant::kResNet50, BackboneVariant::kVgg16}) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

std::vector<TensorShape> param_shapes(const Node& n) {
  const auto u = [](int v) { return static_cast<std::uint32_t>(v); };
  std::vector<TensorShape> shapes;
  switch (n.op) {
    case NodeOp::kConv:
      shapes.push_back({"kernel", {u(n.kernel), u(n.kernel), u(n.in_channels), u(n.filters)}});
      break;
    case NodeOp::kDepthwise:
      shapes.push_back({"depthwise_kernel", {u(n.kernel), u(n.kernel), u(n.out.channels), 1}});
      if (n.bias) shapes.push_back({"bias", {u(n.out.channels)}});
      return shapes;
    case NodeOp::kBatchNorm:
      for (const char* role : {"gamma", "beta", "moving_mean", "moving_variance"}) {
        shapes.push_back({role, {u(n.out.channels)}});
      }
      return shapes;
    default:
      return shapes;
  }
  if (n.bias) shapes.push_back({"bias", {u(n.filters)}});
  return shapes;
}

namespace {

class GraphBuilder {
 public:
  GraphBuilder(std::string name, Shape3 input, Preprocessing pre) {
    arch_.name = std::move(name);
    arch_.input = input;
    arch_.preprocessing = pre;
    Node n;
    n.name = "input";
    n.op = NodeOp::kInput;
    n.out = input;
    arch_.nodes.push_back(n);
  }

  const Shape3& shape(int id) const { return arch_.nodes[id].out; }
  int last() const { return static_cast<int>(arch_.nodes.size()) - 1; }

  int zero_pad(const std::string& name, int x, nn::Padding pad) {
    Node n = make(name, NodeOp::kZeroPad, {x});
    n.pad = pad;
    n.out = {shape(x).height + pad.top + pad.bottom, shape(x).width + pad.left + pad.right, shape(x).channels};
    return add(std::move(n));
  }

  int conv(const std::string& name, int x, int filters, int kernel, int stride, bool same, bool bias,
           Activation act = Activation::kNone) {
    Node n = make(name, NodeOp::kConv, {x});
    n.filters = filters;
    n.in_channels = shape(x).channels;
    n.kernel = kernel;
    n.stride = stride;
    n.same = same;
    n.bias = bias;
    n.act = act;
    n.out = spatial(shape(x), kernel, stride, same);
    n.out.channels = filters;
    return add(std::move(n));
  }

  int depthwise(const std::string& name, int x, int kernel, int stride, bool same) {
    Node n = make(name, NodeOp::kDepthwise, {x});
    n.kernel = kernel;
    n.stride = stride;
    n.same = same;
    n.out = spatial(shape(x), kernel, stride, same);
    n.out.channels = shape(x).channels;
    return add(std::move(n));
  }

  int batch_norm(const std::string& name, int x, float epsilon) {
    Node n = make(name, NodeOp::kBatchNorm, {x});
    n.epsilon = epsilon;
    n.out = shape(x);
    return add(std::move(n));
  }

  int activation(const std::string& name, int x, Activation act) {
    Node n = make(name, NodeOp::kActivation, {x});
    n.act = act;
    n.out = shape(x);
    return add(std::move(n));
  }

  int add_nodes(const std::string& name, int a, int b) {
    if (!(shape(a) == shape(b))) throw Error(ErrorKind::kComposition, name + ": add of mismatched shapes");
    Node n = make(name, NodeOp::kAdd, {a, b});
    n.out = shape(a);
    return add(std::move(n));
  }

  int multiply(const std::string& name, int x, int gate) {
    if (shape(gate).channels != shape(x).channels) {
      throw Error(ErrorKind::kComposition, name + ": gate width differs from its input");
    }
    Node n = make(name, NodeOp::kMultiply, {x, gate});
    n.out = shape(x);
    return add(std::move(n));
  }

  int global_pool(const std::string& name, int x) {
    Node n = make(name, NodeOp::kGlobalAvgPool, {x});
    n.out = {1, 1, shape(x).channels};
    return add(std::move(n));
  }

  int max_pool(const std::string& name, int x, int kernel, int stride) {
    Node n = make(name, NodeOp::kMaxPool, {x});
    n.kernel = kernel;
    n.stride = stride;
    n.out = spatial(shape(x), kernel, stride, false);
    n.out.channels = shape(x).channels;
    return add(std::move(n));
  }

  BackboneArch finish(std::int64_t state_params) {
    arch_.state_params = state_params;
    return std::move(arch_);
  }

 private:
  static Node make(const std::string& name, NodeOp op, std::vector<int> inputs) {
    Node n;
    n.name = name;
    n.op = op;
    n.inputs = std::move(inputs);
    return n;
  }

  static Shape3 spatial(const Shape3& in, int kernel, int stride, bool same) {
    auto dim = [&](int v) { return same ? (v + stride - 1) / stride : (v - kernel) / stride + 1; };
    Shape3 out{dim(in.height), dim(in.width), in.channels};
    if (out.height < 1 || out.width < 1) throw Error(ErrorKind::kComposition, "input too small for the backbone");
    return out;
  }

  int add(Node n) {
    arch_.nodes.push_back(std::move(n));
    return last();
  }

  BackboneArch arch_;
};

// Keras' correct_pad: asymmetric padding ahead of a stride-2 valid conv.
nn::Padding correct_pad(const Shape3& in, int kernel) {
  const int c = kernel / 2;
  return {c - (1 - in.height % 2), c, c - (1 - in.width % 2), c};
}

const std::vector<EfficientNetBlockArgs>& standard_blocks() {
  static const std::vector<EfficientNetBlockArgs> blocks{
      {3, 1, 32, 16, 1, 1, 0.25},   {3, 2, 16, 24, 6, 2, 0.25},  {5, 2, 24, 40, 6, 2, 0.25},
      {3, 3, 40, 80, 6, 2, 0.25},   {5, 3, 80, 112, 6, 1, 0.25}, {5, 4, 112, 192, 6, 2, 0.25},
      {3, 1, 192, 320, 6, 1, 0.25},
  };
  return blocks;
}

}  // namespace

std::int64_t BackboneArch::learned_params() const {
  std::int64_t total = 0;
  for (const auto& n : nodes) {
    for (const auto& t : param_shapes(n)) {
      std::int64_t size = 1;
      for (auto d : t.dims) size *= d;
      total += size;
    }
  }
  return total;
}

BackboneArch efficientnet_arch(const EfficientNetConfig& config) {
  const auto& blocks = config.blocks.empty() ? standard_blocks() : config.blocks;
  const auto filters = [&](int c) { return round_filters(config.width * c); };
  const auto repeats = [&](int r) { return static_cast<int>(std::ceil(config.depth * r)); };

  // ImageNet statistics as the pretrained Keras weights apply them: Keras
  // stores variance = stddev^2 and then rescales once more by 1/sqrt(stddev).
  Preprocessing pre;
  pre.input_scale = 1.0f / 255.0f;
  pre.mean = {0.485f, 0.456f, 0.406f};
  const float stddev[3] = {0.229f, 0.224f, 0.225f};
  for (int c = 0; c < 3; ++c) pre.scale[c] = 1.0f / (stddev[c] * std::sqrt(stddev[c]));

  GraphBuilder g("efficientnet", {config.resolution, config.resolution, 3}, pre);
  int x = g.zero_pad("stem_conv_pad", 0, correct_pad(g.shape(0), 3));
  x = g.conv("stem_conv", x, filters(config.stem_filters), 3, 2, false, false);
  x = g.batch_norm("stem_bn", x, 1e-3f);
  x = g.activation("stem_activation", x, Activation::kSwish);

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto args = blocks[i];
    int in_f = filters(args.filters_in);
    const int out_f = filters(args.filters_out);
    int stride = args.stride;
    for (int j = 0; j < repeats(args.repeats); ++j) {
      if (j > 0) {
        stride = 1;
        in_f = out_f;
      }
      const std::string p = "block" + std::to_string(i + 1) + static_cast<char>('a' + j) + "_";
      const int block_in = x;
      const int expanded = in_f * args.expand_ratio;
      if (args.expand_ratio != 1) {
        x = g.conv(p + "expand_conv", x, expanded, 1, 1, true, false);
        x = g.batch_norm(p + "expand_bn", x, 1e-3f);
        x = g.activation(p + "expand_activation", x, Activation::kSwish);
      }
      if (stride == 2) {
        x = g.zero_pad(p + "dwconv_pad", x, correct_pad(g.shape(x), args.kernel));
        x = g.depthwise(p + "dwconv", x, args.kernel, 2, false);
      } else {
        x = g.depthwise(p + "dwconv", x, args.kernel, stride, true);
      }
      x = g.batch_norm(p + "bn", x, 1e-3f);
      x = g.activation(p + "activation", x, Activation::kSwish);
      if (args.se_ratio > 0 && args.se_ratio <= 1) {
        const int se_f = std::max(1, static_cast<int>(in_f * args.se_ratio));
        int se = g.global_pool(p + "se_squeeze", x);
        se = g.conv(p + "se_reduce", se, se_f, 1, 1, true, true, Activation::kSwish);
        se = g.conv(p + "se_expand", se, expanded, 1, 1, true, true, Activation::kSigmoid);
        x = g.multiply(p + "se_excite", x, se);
      }
      x = g.conv(p + "project_conv", x, out_f, 1, 1, true, false);
      x = g.batch_norm(p + "project_bn", x, 1e-3f);
      if (stride == 1 && in_f == out_f) x = g.add_nodes(p + "add", x, block_in);
    }
  }
  x = g.conv("top_conv", x, filters(config.top_filters), 1, 1, true, false);
  x = g.batch_norm("top_bn", x, 1e-3f);
  x = g.activation("top_activation", x, Activation::kSwish);
  g.global_pool("avg_pool", x);
  // Normalization-layer state reported with the pretrained B-series tables.
  return g.finish(4);
}

BackboneArch resnet_arch(const ResNetConfig& config) {
  // Caffe-style: BGR order, per-channel mean removal on the 0..255 scale.
  Preprocessing pre;
  pre.bgr = true;
  pre.mean = {103.939f, 116.779f, 123.68f};
  const float eps = 1.001e-5f;

  GraphBuilder g("resnet", {config.resolution, config.resolution, 3}, pre);
  int x = g.zero_pad("conv1_pad", 0, {3, 3, 3, 3});
  x = g.conv("conv1_conv", x, config.stem_filters, 7, 2, false, true);
  x = g.batch_norm("conv1_bn", x, eps);
  x = g.activation("conv1_relu", x, Activation::kRelu);
  x = g.zero_pad("pool1_pad", x, {1, 1, 1, 1});
  x = g.max_pool("pool1_pool", x, 3, 2);

  for (std::size_t s = 0; s < config.stacks.size(); ++s) {
    const auto& stack = config.stacks[s];
    for (int b = 1; b <= stack.blocks; ++b) {
      const std::string p = "conv" + std::to_string(s + 2) + "_block" + std::to_string(b) + "_";
      const int stride = b == 1 ? stack.stride : 1;
      int shortcut = x;
      if (b == 1) {
        shortcut = g.conv(p + "0_conv", x, 4 * stack.filters, 1, stride, false, true);
        shortcut = g.batch_norm(p + "0_bn", shortcut, eps);
      }
      int y = g.conv(p + "1_conv", x, stack.filters, 1, stride, false, true);
      y = g.batch_norm(p + "1_bn", y, eps);
      y = g.activation(p + "1_relu", y, Activation::kRelu);
      y = g.conv(p + "2_conv", y, stack.filters, 3, 1, true, true);
      y = g.batch_norm(p + "2_bn", y, eps);
      y = g.activation(p + "2_relu", y, Activation::kRelu);
      y = g.conv(p + "3_conv", y, 4 * stack.filters, 1, 1, false, true);
      y = g.batch_norm(p + "3_bn", y, eps);
      x = g.add_nodes(p + "add", shortcut, y);
      x = g.activation(p + "out", x, Activation::kRelu);
    }
  }
  g.global_pool("avg_pool", x);
  return g.finish(0);
}

BackboneArch vgg_arch(const VggConfig& config) {
  Preprocessing pre;
  pre.bgr = true;
  pre.mean = {103.939f, 116.779f, 123.68f};
  GraphBuilder g("vgg", {config.resolution, config.resolution, 3}, pre);
  int x = 0;
  for (std::size_t b = 0; b < config.blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b + 1) + "_";
    for (int c = 1; c <= config.blocks[b].first; ++c) {
      x = g.conv(p + "conv" + std::to_string(c), x, config.blocks[b].second, 3, 1, true, true, Activation::kRelu);
    }
    x = g.max_pool(p + "pool", x, 2, 2);
  }
  g.global_pool("avg_pool", x);
  return g.finish(0);
}

BackboneArch reference_arch(BackboneVariant variant) {
  switch (variant) {
    case BackboneVariant::kEfficientNetB4: {
      auto arch = efficientnet_arch({1.4, 1.8, 380, {}, 32, 1280});
      arch.name = "efficientnet_b4";
      return arch;
    }
    case BackboneVariant::kResNet50: {
      auto arch = resnet_arch({128, 64, {{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 2}}});
      arch.name = "resnet50";
      return arch;
    }
    case BackboneVariant::kVgg16: {
      auto arch = vgg_arch({128, {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}}});
      arch.name = "vgg16";
      return arch;
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown backbone variant");
}

NetworkSpec efficientnet_b0_spec() {
  std::vector<StageSpec> stages;
  stages.push_back({{OperatorKind::kConv, 3, 2, 3, "stem"}, 1, {112, 112, 32}});
  int size = 112;
  int index = 1;
  for (const auto& b : standard_blocks()) {
    size = (size + b.stride - 1) / b.stride;
    stages.push_back({{OperatorKind::kBlock, b.kernel, b.stride, 0, "block" + std::to_string(index++)},
                      b.repeats,
                      {size, size, b.filters_out}});
  }
  stages.push_back({{OperatorKind::kConv, 1, 1, 0, "top"}, 1, {size, size, 1280}});
  return compose_network(std::move(stages), {224, 224, 3});
}

WeightContainer random_backbone_weights(const BackboneArch& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightContainer wc;
  wc.tag = "backbone/" + arch.name;
  for (const auto& n : arch.nodes) {
    const auto shapes = param_shapes(n);
    if (shapes.empty()) continue;
    LayerRecord rec;
    rec.name = n.name;
    for (const auto& s : shapes) {
      Tensor t = Tensor::zeros(s.dims);
      if (s.role == "kernel" || s.role == "depthwise_kernel") {
        const double fan_in = s.role == "kernel" ? static_cast<double>(s.dims[0]) * s.dims[1] * s.dims[2]
                                                 : static_cast<double>(s.dims[0]) * s.dims[1];
        std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
        for (auto& v : t.values) v = dist(rng);
      } else if (s.role == "gamma" || s.role == "moving_variance") {
        std::fill(t.values.begin(), t.values.end(), 1.0f);
      }
      rec.tensors.push_back(std::move(t));
    }
    wc.layers.push_back(std::move(rec));
  }
  return wc;
}

BackboneExecutor::BackboneExecutor(BackboneArch arch, const WeightContainer& weights)
    : arch_(std::move(arch)), params_(arch_.nodes.size()), last_use_(arch_.nodes.size(), -1) {
  for (std::size_t i = 0; i < arch_.nodes.size(); ++i) {
    const auto& n = arch_.nodes[i];
    for (int in : n.inputs) last_use_[in] = static_cast<int>(i);
    const auto shapes = param_shapes(n);
    if (shapes.empty()) continue;
    const LayerRecord* rec = weights.find(n.name);
    if (!rec) throw Error(ErrorKind::kLoad, "backbone weights lack layer '" + n.name + "'");
    if (rec->tensors.size() != shapes.size()) {
      throw Error(ErrorKind::kLoad, "layer '" + n.name + "' has " + std::to_string(rec->tensors.size()) +
                                        " tensors, expected " + std::to_string(shapes.size()));
    }
    for (std::size_t t = 0; t < shapes.size(); ++t) {
      if (rec->tensors[t].shape != shapes[t].dims) {
        throw Error(ErrorKind::kLoad, "layer '" + n.name + "' tensor '" + shapes[t].role + "' has the wrong shape");
      }
    }
    auto& p = params_[i];
    if (n.op == NodeOp::kBatchNorm) {
      const auto& gamma = rec->tensors[0].values;
      const auto& beta = rec->tensors[1].values;
      const auto& mean = rec->tensors[2].values;
      const auto& var = rec->tensors[3].values;
      p.a.resize(gamma.size());
      p.b.resize(gamma.size());
      for (std::size_t c = 0; c < gamma.size(); ++c) {
        p.a[c] = gamma[c] / std::sqrt(var[c] + n.epsilon);
        p.b[c] = beta[c] - mean[c] * p.a[c];
      }
    } else {
      p.a = rec->tensors[0].values;
      if (rec->tensors.size() > 1) p.b = rec->tensors[1].values;
    }
  }
}

namespace {

void apply_activation(std::vector<float>& values, Activation act) {
  switch (act) {
    case Activation::kNone: break;
    case Activation::kRelu: nn::relu_inplace(values); break;
    case Activation::kSwish: nn::swish_inplace(values); break;
    case Activation::kSigmoid: nn::sigmoid_inplace(values); break;
  }
}

}  // namespace

std::vector<float> BackboneExecutor::features(const imaging::ImageBuffer& image) const {
  if (image.width() != arch_.input.width || image.height() != arch_.input.height || image.channels() != 3) {
    throw Error(ErrorKind::kInvalidArgument, "backbone expects a " + std::to_string(arch_.input.width) + "x" +
                                                 std::to_string(arch_.input.height) + " RGB image");
  }
  const auto& kernels = simd::active();
  std::vector<std::optional<nn::FeatureMap>> acts(arch_.nodes.size());
  for (std::size_t i = 0; i < arch_.nodes.size(); ++i) {
    const auto& n = arch_.nodes[i];
    const auto& p = params_[i];
    auto in = [&](int k) -> const nn::FeatureMap& { return *acts[n.inputs[k]]; };
    nn::FeatureMap out;
    switch (n.op) {
      case NodeOp::kInput: {
        const auto& pre = arch_.preprocessing;
        out = nn::FeatureMap(n.out.height, n.out.width, 3);
        const auto px = image.pixels();
        for (std::size_t j = 0; j < out.data.size(); j += 3) {
          for (int c = 0; c < 3; ++c) {
            const float v = px[j + (pre.bgr ? 2 - c : c)];
            out.data[j + c] = (v * pre.input_scale - pre.mean[c]) * pre.scale[c];
          }
        }
        break;
      }
      case NodeOp::kZeroPad: out = nn::zero_pad(in(0), n.pad); break;
      case NodeOp::kConv: {
        const auto pad = n.same ? nn::same_padding(in(0).height, in(0).width, n.kernel, n.stride) : nn::Padding{};
        out = nn::conv2d(in(0), p.a, p.b, n.kernel, n.kernel, n.filters, n.stride, pad, kernels);
        apply_activation(out.data, n.act);
        break;
      }
      case NodeOp::kDepthwise: {
        const auto pad = n.same ? nn::same_padding(in(0).height, in(0).width, n.kernel, n.stride) : nn::Padding{};
        out = nn::depthwise_conv2d(in(0), p.a, p.b, n.kernel, n.stride, pad, kernels);
        break;
      }
      case NodeOp::kBatchNorm:
        out = in(0);
        nn::scale_shift(out, p.a, p.b);
        break;
      case NodeOp::kActivation:
        out = in(0);
        apply_activation(out.data, n.act);
        break;
      case NodeOp::kAdd: {
        out = in(0);
        const auto& other = in(1).data;
        for (std::size_t j = 0; j < out.data.size(); ++j) out.data[j] += other[j];
        break;
      }
      case NodeOp::kMultiply: {
        out = in(0);
        const auto& gate = in(1).data;
        const std::size_t c = gate.size();
        for (std::size_t j = 0; j < out.data.size(); ++j) out.data[j] *= gate[j % c];
        break;
      }
      case NodeOp::kGlobalAvgPool: {
        out = nn::FeatureMap(1, 1, in(0).channels);
        out.data = nn::global_average_pool(in(0));
        break;
      }
      case NodeOp::kMaxPool: out = nn::max_pool(in(0), n.kernel, n.stride, false); break;
    }
    acts[i] = std::move(out);
    for (int k : n.inputs) {
      if (last_use_[k] == static_cast<int>(i)) acts[k].reset();
    }
  }
  return std::move(acts.back()->data);
}

}  // namespace forgeguard::model_zoo
