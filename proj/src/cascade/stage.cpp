#include "forgeguard/cascade/stage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "forgeguard/core/error.hpp"
#include "forgeguard/imaging/transform.hpp"
#include "forgeguard/nn/ops.hpp"

namespace forgeguard::cascade {

using imaging::Box;
using imaging::ImageBuffer;

std::string_view to_string(StageRole role) {
  switch (role) {
    case StageRole::kProposal: return "proposal";
    case StageRole::kRefine: return "refine";
    case StageRole::kOutput: return "output";
  }
  return "unknown";
}

std::optional<StageRole> parse_role(std::string_view name) {
  if (name == "proposal") return StageRole::kProposal;
  if (name == "refine") return StageRole::kRefine;
  if (name == "output") return StageRole::kOutput;
  return std::nullopt;
}

int input_size(StageRole role) {
  switch (role) {
    case StageRole::kProposal: return 12;
    case StageRole::kRefine: return 24;
    case StageRole::kOutput: return 48;
  }
  return 0;
}

std::vector<ScanCell> StageBackend::scan(const ImageBuffer& image, int stride) const {
  if (stride < 1) throw Error(ErrorKind::kInvalidArgument, "scan stride must be >= 1");
  const int size = input_size();
  std::vector<ScanCell> cells;
  for (int y = 0; y + size <= image.height(); y += stride) {
    for (int x = 0; x + size <= image.width(); x += stride) {
      const Box window{static_cast<double>(x), static_cast<double>(y), static_cast<double>(size),
                       static_cast<double>(size)};
      cells.push_back({x, y, evaluate(imaging::crop(image, window))});
    }
  }
  return cells;
}

Box apply_box_regression(const Box& box, const std::array<double, 4>& offsets) {
  // Written in origin + extent form so zero offsets reproduce the box exactly.
  Box out{box.x + offsets[0] * box.w, box.y + offsets[1] * box.h, box.w + (offsets[2] - offsets[0]) * box.w,
          box.h + (offsets[3] - offsets[1]) * box.h};
  if (out.w < 0) {
    out.x += out.w;
    out.w = -out.w;
  }
  if (out.h < 0) {
    out.y += out.h;
    out.h = -out.h;
  }
  return out;
}

imaging::Landmarks decode_landmarks(const Box& box, const std::array<double, 10>& f) {
  auto pt = [&](int i) { return imaging::Point{box.x + f[2 * i] * box.w, box.y + f[2 * i + 1] * box.h}; };
  return {pt(0), pt(1), pt(2), pt(3), pt(4)};
}

// ---------------------------------------------------------------------------
// Marker rule

MarkerStageBackend::MarkerStageBackend(StageRole role, Options options) : role_(role), options_(options) {
  if (options_.bright_threshold < 0 || options_.bright_threshold > 255) {
    throw Error(ErrorKind::kInvalidArgument, "marker bright_threshold must lie in [0, 255]");
  }
}

StageOutput MarkerStageBackend::evaluate(const ImageBuffer& patch) const {
  const int w = patch.width();
  const int h = patch.height();
  const int ring_x = std::max(1, w / 24);
  const int ring_y = std::max(1, h / 24);

  long center_total = 0, center_bright = 0, ring_total = 0, ring_bright = 0;
  int bx1 = w, by1 = h, bx2 = -1, by2 = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool bright = patch.luminance(x, y) >= options_.bright_threshold;
      if (bright) {
        bx1 = std::min(bx1, x);
        by1 = std::min(by1, y);
        bx2 = std::max(bx2, x);
        by2 = std::max(by2, y);
      }
      const bool center = x >= w / 4 && x < w - w / 4 && y >= h / 4 && y < h - h / 4;
      const bool ring = x < ring_x || x >= w - ring_x || y < ring_y || y >= h - ring_y;
      if (center) {
        ++center_total;
        center_bright += bright;
      }
      if (ring) {
        ++ring_total;
        ring_bright += bright;
      }
    }
  }

  StageOutput out;
  const double center_frac = center_total ? static_cast<double>(center_bright) / center_total : 0.0;
  const double ring_frac = ring_total ? static_cast<double>(ring_bright) / ring_total : 0.0;
  out.classifier = center_frac * (1.0 - ring_frac);

  if (options_.regress && bx2 >= 0) {
    auto fit = [](int lo, int hi, int extent, double& d1, double& d2) {
      const double side = (hi + 1 - lo) / kMarkerFill;
      const double mid = 0.5 * (lo + hi + 1);
      d1 = (mid - 0.5 * side) / extent;
      d2 = (mid + 0.5 * side - extent) / extent;
    };
    fit(bx1, bx2, w, out.bbox_regress[0], out.bbox_regress[2]);
    fit(by1, by2, h, out.bbox_regress[1], out.bbox_regress[3]);
  }
  if (role_ == StageRole::kOutput && options_.landmarks) out.landmark_regress = kMarkerLandmarks;
  return out;
}

WeightContainer MarkerStageBackend::to_container() const {
  WeightContainer c;
  c.tag = "cascade/" + std::string(to_string(role_));
  LayerRecord rule;
  rule.name = "marker";
  rule.kind = static_cast<std::uint32_t>(StageLayerKind::kMarkerRule);
  rule.attrs = {options_.bright_threshold, options_.regress ? 1 : 0, options_.landmarks ? 1 : 0};
  c.layers.push_back(std::move(rule));
  return c;
}

// ---------------------------------------------------------------------------
// Network interpreter

namespace {

[[noreturn]] void load_error(std::size_t index, const LayerRecord& layer, const std::string& what) {
  throw Error(ErrorKind::kLoad, "layer " + std::to_string(index) + " '" + layer.name + "': " + what);
}

const Tensor& tensor_at(std::size_t index, const LayerRecord& layer, std::size_t t, std::size_t rank,
                        const char* field) {
  if (layer.tensors.size() <= t) load_error(index, layer, std::string("missing tensor ") + field);
  const Tensor& tensor = layer.tensors[t];
  if (tensor.shape.size() != rank) {
    load_error(index, layer, std::string(field) + " must have rank " + std::to_string(rank));
  }
  return tensor;
}

int attr_at(std::size_t index, const LayerRecord& layer, std::size_t a, const char* field) {
  if (layer.attrs.size() <= a) load_error(index, layer, std::string("missing attribute ") + field);
  return layer.attrs[a];
}

enum HeadKind { kClassifierHead = 0, kBoxHead = 1, kLandmarkHead = 2 };
constexpr int kHeadWidth[] = {2, 4, 10};

StageLayerKind kind_of(const LayerRecord& layer) { return static_cast<StageLayerKind>(layer.kind); }

// Runs the trunk (everything except heads) on an NHWC map.
nn::FeatureMap run_trunk(const WeightContainer& c, nn::FeatureMap x) {
  const auto& kernels = simd::active();
  for (const auto& layer : c.layers) {
    switch (kind_of(layer)) {
      case StageLayerKind::kInputScale: {
        const float offset = layer.tensors[0].values[0];
        const float scale = layer.tensors[0].values[1];
        for (float& v : x.data) v = (v - offset) * scale;
        break;
      }
      case StageLayerKind::kConv2d: {
        const auto& k = layer.tensors[0];
        x = nn::conv2d(x, k.values, layer.tensors[1].values, static_cast<int>(k.shape[0]),
                       static_cast<int>(k.shape[1]), static_cast<int>(k.shape[3]), layer.attrs[0], {}, kernels);
        break;
      }
      case StageLayerKind::kPrelu:
        nn::prelu(x.data, layer.tensors[0].values, x.channels);
        break;
      case StageLayerKind::kMaxPool:
        x = nn::max_pool(x, layer.attrs[0], layer.attrs[1], true);
        break;
      case StageLayerKind::kDense: {
        const auto& wt = layer.tensors[0];
        auto y = nn::dense(x.data, wt.values, layer.tensors[1].values, static_cast<int>(wt.shape[1]), kernels);
        x = nn::FeatureMap(1, 1, static_cast<int>(y.size()));
        x.data = std::move(y);
        break;
      }
      default:
        break;
    }
  }
  return x;
}

nn::FeatureMap to_feature_map(const ImageBuffer& image) {
  const ImageBuffer rgb = imaging::to_rgb(image);
  nn::FeatureMap x(rgb.height(), rgb.width(), 3);
  const auto px = rgb.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) x.data[i] = px[i];
  return x;
}

double face_probability(float logit0, float logit1) {
  // softmax over two logits, index 1 = face
  return 1.0 / (1.0 + std::exp(static_cast<double>(logit0) - static_cast<double>(logit1)));
}

StageOutput apply_heads(const WeightContainer& c, std::span<const float> features, bool landmarks_allowed) {
  const auto& kernels = simd::active();
  StageOutput out;
  for (const auto& layer : c.layers) {
    if (kind_of(layer) != StageLayerKind::kHead) continue;
    const auto& wt = layer.tensors[0];
    const auto y = nn::dense(features, wt.values, layer.tensors[1].values, static_cast<int>(wt.shape[1]), kernels);
    switch (layer.attrs[0]) {
      case kClassifierHead: out.classifier = face_probability(y[0], y[1]); break;
      case kBoxHead: std::copy(y.begin(), y.end(), out.bbox_regress.begin()); break;
      case kLandmarkHead:
        if (landmarks_allowed) {
          std::array<double, 10> lm{};
          std::copy(y.begin(), y.end(), lm.begin());
          out.landmark_regress = lm;
        }
        break;
      default: break;
    }
  }
  return out;
}

}  // namespace

NetworkStageBackend::NetworkStageBackend(WeightContainer container) : container_(std::move(container)) {
  const std::string prefix = "cascade/";
  if (container_.tag.rfind(prefix, 0) != 0) throw Error(ErrorKind::kLoad, "tag: expected 'cascade/<role>'");
  const auto role = parse_role(std::string_view(container_.tag).substr(prefix.size()));
  if (!role) throw Error(ErrorKind::kLoad, "tag: unknown stage role in '" + container_.tag + "'");
  role_ = *role;

  // Walk the layers once with a symbolic shape to validate every tensor.
  int h = input_size(), w = h, ch = 3;
  bool flattened = false;
  bool seen_head[3] = {false, false, false};
  for (std::size_t i = 0; i < container_.layers.size(); ++i) {
    const auto& layer = container_.layers[i];
    const bool is_head = kind_of(layer) == StageLayerKind::kHead;
    if (!is_head && (seen_head[0] || seen_head[1] || seen_head[2])) load_error(i, layer, "trunk layer after a head");
    switch (kind_of(layer)) {
      case StageLayerKind::kInputScale: {
        const auto& t = tensor_at(i, layer, 0, 1, "offset_scale");
        if (t.shape[0] != 2) load_error(i, layer, "offset_scale must hold 2 values");
        break;
      }
      case StageLayerKind::kConv2d: {
        if (flattened) load_error(i, layer, "convolution after a dense layer");
        const auto& k = tensor_at(i, layer, 0, 4, "kernel");
        const auto& b = tensor_at(i, layer, 1, 1, "bias");
        const int stride = attr_at(i, layer, 0, "stride");
        if (stride < 1) load_error(i, layer, "stride must be >= 1");
        if (static_cast<int>(k.shape[2]) != ch) {
          load_error(i, layer, "kernel expects " + std::to_string(k.shape[2]) + " input channels, got " +
                                   std::to_string(ch));
        }
        if (b.shape[0] != k.shape[3]) load_error(i, layer, "bias length differs from output channels");
        h = (h - static_cast<int>(k.shape[0])) / stride + 1;
        w = (w - static_cast<int>(k.shape[1])) / stride + 1;
        ch = static_cast<int>(k.shape[3]);
        native_stride_ *= stride;
        break;
      }
      case StageLayerKind::kPrelu: {
        const auto& a = tensor_at(i, layer, 0, 1, "alpha");
        if (static_cast<int>(a.shape[0]) != ch) load_error(i, layer, "alpha length differs from channels");
        break;
      }
      case StageLayerKind::kMaxPool: {
        if (flattened) load_error(i, layer, "pooling after a dense layer");
        const int k = attr_at(i, layer, 0, "kernel");
        const int s = attr_at(i, layer, 1, "stride");
        if (k < 1 || s < 1) load_error(i, layer, "kernel and stride must be >= 1");
        auto dim = [&](int in) {
          int n = (in - k + s - 1) / s + 1;
          if ((n - 1) * s >= in) --n;
          return n;
        };
        h = dim(h);
        w = dim(w);
        native_stride_ *= s;
        break;
      }
      case StageLayerKind::kDense:
      case StageLayerKind::kHead: {
        const auto& wt = tensor_at(i, layer, 0, 2, "weights");
        const auto& b = tensor_at(i, layer, 1, 1, "bias");
        const long in = static_cast<long>(h) * w * ch;
        if (static_cast<long>(wt.shape[0]) != in) {
          load_error(i, layer, "weights expect " + std::to_string(wt.shape[0]) + " inputs, trunk yields " +
                                   std::to_string(in));
        }
        if (b.shape[0] != wt.shape[1]) load_error(i, layer, "bias length differs from outputs");
        if (is_head) {
          const int kind = attr_at(i, layer, 0, "head kind");
          if (kind < 0 || kind > 2) load_error(i, layer, "unknown head kind " + std::to_string(kind));
          if (static_cast<int>(wt.shape[1]) != kHeadWidth[kind]) {
            load_error(i, layer, "head kind " + std::to_string(kind) + " needs " + std::to_string(kHeadWidth[kind]) +
                                     " outputs");
          }
          if (kind == kLandmarkHead && role_ != StageRole::kOutput) {
            load_error(i, layer, "landmark head is only valid for the output stage");
          }
          if (seen_head[kind]) load_error(i, layer, "duplicate head");
          seen_head[kind] = true;
        } else {
          fully_convolutional_ = false;
          flattened = true;
          h = w = 1;
          ch = static_cast<int>(wt.shape[1]);
        }
        break;
      }
      default:
        load_error(i, layer, "unsupported layer kind " + std::to_string(layer.kind));
    }
    if (h < 1 || w < 1) load_error(i, layer, "activation collapses below 1x1");
  }
  if (!seen_head[kClassifierHead]) throw Error(ErrorKind::kLoad, "heads: classifier head missing");
  if (!seen_head[kBoxHead]) throw Error(ErrorKind::kLoad, "heads: box head missing");
  if (fully_convolutional_ && (h != 1 || w != 1)) {
    // Heads of a convolutional trunk act per cell; a patch must reduce to one.
    throw Error(ErrorKind::kLoad, "heads: convolutional trunk must reduce a patch to 1x1, got " +
                                      std::to_string(h) + "x" + std::to_string(w));
  }
}

StageOutput NetworkStageBackend::evaluate(const ImageBuffer& patch) const {
  const int size = input_size();
  if (patch.width() != size || patch.height() != size) {
    throw Error(ErrorKind::kDetectionBackend, "stage expects a " + std::to_string(size) + "x" + std::to_string(size) +
                                                  " patch");
  }
  const auto features = run_trunk(container_, to_feature_map(patch));
  return apply_heads(container_, features.data, role_ == StageRole::kOutput);
}

std::vector<ScanCell> NetworkStageBackend::scan(const ImageBuffer& image, int stride) const {
  const int size = input_size();
  if (!fully_convolutional_ || stride != native_stride_) return StageBackend::scan(image, stride);
  if (image.width() < size || image.height() < size) return {};
  const auto map = run_trunk(container_, to_feature_map(image));
  std::vector<ScanCell> cells;
  for (int i = 0; i < map.height; ++i) {
    const int y = i * stride;
    if (y + size > image.height()) break;
    for (int j = 0; j < map.width; ++j) {
      const int x = j * stride;
      if (x + size > image.width()) break;
      const std::span<const float> features(map.pixel(i, j), static_cast<std::size_t>(map.channels));
      cells.push_back({x, y, apply_heads(container_, features, role_ == StageRole::kOutput)});
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Files

void save_stage_weights(const StageBackend& backend, const std::filesystem::path& path) {
  write_container(backend.to_container(), path);
}

std::shared_ptr<const StageBackend> stage_from_container(const WeightContainer& container, StageRole expected_role) {
  const std::string prefix = "cascade/";
  if (container.tag.rfind(prefix, 0) != 0) throw Error(ErrorKind::kLoad, "tag: expected 'cascade/<role>'");
  const auto role = parse_role(std::string_view(container.tag).substr(prefix.size()));
  if (!role) throw Error(ErrorKind::kLoad, "tag: unknown stage role in '" + container.tag + "'");
  if (*role != expected_role) {
    throw Error(ErrorKind::kRole, "stage file declares role '" + std::string(to_string(*role)) + "' but '" +
                                      std::string(to_string(expected_role)) + "' was expected");
  }
  if (container.layers.size() == 1 && kind_of(container.layers[0]) == StageLayerKind::kMarkerRule) {
    const auto& layer = container.layers[0];
    MarkerStageBackend::Options opt;
    opt.bright_threshold = attr_at(0, layer, 0, "bright_threshold");
    opt.regress = attr_at(0, layer, 1, "regress") != 0;
    opt.landmarks = attr_at(0, layer, 2, "landmarks") != 0;
    try {
      return std::make_shared<MarkerStageBackend>(*role, opt);
    } catch (const Error& e) {
      throw Error(ErrorKind::kLoad, std::string("layer 0 'marker': ") + e.what());
    }
  }
  return std::make_shared<NetworkStageBackend>(container);
}

std::shared_ptr<const StageBackend> load_stage_weights(const std::filesystem::path& path, StageRole expected_role) {
  WeightContainer container;
  try {
    container = read_container(path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kLoad) throw Error(ErrorKind::kLoad, path.string() + ": " + e.what());
    throw;
  }
  return stage_from_container(container, expected_role);
}

}  // namespace forgeguard::cascade
