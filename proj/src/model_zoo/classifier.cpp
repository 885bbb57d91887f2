#include "forgeguard/model_zoo/classifier.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "forgeguard/core/error.hpp"
#include "forgeguard/imaging/transform.hpp"
#include "forgeguard/model_zoo/activations.hpp"
#include "forgeguard/model_zoo/registry.hpp"
#include "forgeguard/nn/ops.hpp"
#include "forgeguard/simd/kernels.hpp"

namespace forgeguard::model_zoo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Uniform in [-limit, limit) from the top 53 bits; portable across standard
// libraries, unlike std::uniform_real_distribution.
float uniform(std::mt19937_64& rng, double limit) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return static_cast<float>((2.0 * u - 1.0) * limit);
}

constexpr std::uint32_t kBackboneRecord = 1;
constexpr std::uint32_t kHeadRecord = 2;

}  // namespace

StubBackbone::StubBackbone(int input_size, int feature_width, std::uint64_t seed)
    : input_size_(input_size), width_(feature_width), seed_(seed) {
  if (input_size < kGrid || feature_width < 1) throw Error(ErrorKind::kInvalidArgument, "bad stub backbone shape");
  std::mt19937_64 rng(seed ^ 0x5DEECE66Dull);
  const int in = kGrid * kGrid * 3;
  projection_.resize(static_cast<std::size_t>(in) * width_);
  const double limit = std::sqrt(3.0 / in);
  for (auto& w : projection_) w = uniform(rng, limit);
}

std::vector<float> StubBackbone::features(const imaging::ImageBuffer& image) const {
  const auto small = imaging::resample(image, kGrid, kGrid);
  std::vector<float> input(small.pixels().size());
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = small.pixels()[i] / 127.5f - 1.0f;
  auto out = nn::dense(input, projection_, {}, width_, simd::active());
  nn::relu_inplace(out);
  return out;
}

std::vector<double> DenseHead::logits(std::span<const float> features) const {
  if (static_cast<int>(features.size()) != in_features) {
    throw Error(ErrorKind::kInvalidArgument, "head expects " + std::to_string(in_features) + " features, got " +
                                                 std::to_string(features.size()));
  }
  const auto out = nn::dense(features, weights, bias, num_classes, simd::active());
  return {out.begin(), out.end()};
}

std::vector<double> head_probabilities(std::span<const double> logits) {
  if (logits.size() == 2) {
    const double p1 = sigmoid(logits[1] - logits[0]);
    return {1.0 - p1, p1};
  }
  return softmax(logits);
}

std::vector<float> ClassifierModel::extract(const imaging::ImageBuffer& image) const {
  const int s = input_size();
  const auto rgb = image.channels() == 3 ? image : imaging::to_rgb(image);
  if (rgb.width() == s && rgb.height() == s) return backbone->features(rgb);
  return backbone->features(imaging::resample(rgb, s, s));
}

std::vector<double> ClassifierModel::classify(std::span<const float> features) const {
  const auto logits = head.logits(features);
  return head_probabilities(logits);
}

std::vector<std::string> default_class_names(int num_classes) {
  if (num_classes == 3) return {"real", "fake", "plastic"};
  if (num_classes == 2) return {"real", "fake"};
  std::vector<std::string> names;
  for (int i = 0; i < num_classes; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

namespace {

std::shared_ptr<const FeatureExtractor> make_backbone(BackboneVariant variant, BackboneSource source,
                                                      const std::optional<fs::path>& registry_dir,
                                                      std::uint64_t seed) {
  auto arch = reference_arch(variant);
  if (source == BackboneSource::kStub) {
    return std::make_shared<StubBackbone>(arch.input.height, arch.feature_width(), seed);
  }
  ModelRegistry registry(registry_dir ? *registry_dir : default_model_cache());
  const std::string name(to_string(variant));
  auto weights = registry.load(name);
  if (weights.tag != "backbone/" + name) {
    throw Error(ErrorKind::kRegistry, "registry entry '" + name + "' holds '" + weights.tag + "'");
  }
  return std::make_shared<ReferenceBackbone>(std::move(arch), weights);
}

}  // namespace

ClassifierModel build_classifier(BackboneVariant variant, int num_classes, const ClassifierOptions& options) {
  if (num_classes < 2) throw Error(ErrorKind::kInvalidArgument, "a classifier needs at least 2 classes");
  if (!options.class_names.empty() && static_cast<int>(options.class_names.size()) != num_classes) {
    throw Error(ErrorKind::kInvalidArgument, "class_names has " + std::to_string(options.class_names.size()) +
                                                 " entries for " + std::to_string(num_classes) + " classes");
  }
  if (!(options.dropout >= 0.0 && options.dropout < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "dropout must be in [0, 1)");
  }
  ClassifierModel model;
  model.variant = variant;
  model.backbone = make_backbone(variant, options.source, options.registry_dir, options.seed);
  model.preprocessing = reference_arch(variant).preprocessing;
  model.class_names = options.class_names.empty() ? default_class_names(num_classes) : options.class_names;

  auto& head = model.head;
  head.in_features = model.backbone->feature_width();
  head.num_classes = num_classes;
  head.dropout = variant == BackboneVariant::kEfficientNetB4 ? options.dropout : 0.0;
  // Glorot uniform weights, zero bias.
  std::mt19937_64 rng(options.seed);
  const double limit = std::sqrt(6.0 / (head.in_features + num_classes));
  head.weights.resize(static_cast<std::size_t>(head.in_features) * num_classes);
  for (auto& w : head.weights) w = uniform(rng, limit);
  head.bias.assign(num_classes, 0.0f);
  return model;
}

ParamCount count_params(const ClassifierModel& model) {
  ParamCount c;
  c.trainable = model.head.param_count();
  c.non_trainable = model.backbone->param_count();
  c.total = c.trainable + c.non_trainable;
  return c;
}

ParamCount reference_param_count(BackboneVariant variant, int num_classes) {
  const auto arch = reference_arch(variant);
  ParamCount c;
  c.trainable = static_cast<std::int64_t>(arch.feature_width()) * num_classes + num_classes;
  c.non_trainable = arch.param_count();
  c.total = c.trainable + c.non_trainable;
  return c;
}

fs::path sidecar_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".json");
  return p;
}

namespace {

json preprocessing_json(const Preprocessing& p) {
  return {{"channel_order", p.bgr ? "bgr" : "rgb"},
          {"input_scale", p.input_scale},
          {"mean", p.mean},
          {"scale", p.scale}};
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void save_checkpoint(const ClassifierModel& model, const fs::path& path) {
  WeightContainer wc;
  wc.tag = "classifier/" + std::string(to_string(model.variant));
  LayerRecord bb;
  bb.name = "backbone";
  bb.kind = kBackboneRecord;
  const auto* stub = dynamic_cast<const StubBackbone*>(model.backbone.get());
  const std::uint64_t seed = stub ? stub->seed() : 0;
  bb.attrs = {stub ? 1 : 0, model.backbone->input_size(), model.backbone->feature_width(),
              static_cast<std::int32_t>(seed & 0xffffffffu), static_cast<std::int32_t>(seed >> 32)};
  wc.layers.push_back(bb);

  LayerRecord head;
  head.name = "head";
  head.kind = kHeadRecord;
  head.attrs = {model.head.in_features, model.head.num_classes};
  Tensor w{{static_cast<std::uint32_t>(model.head.in_features), static_cast<std::uint32_t>(model.head.num_classes)},
           model.head.weights};
  Tensor b{{static_cast<std::uint32_t>(model.head.num_classes)}, model.head.bias};
  Tensor d{{1}, {static_cast<float>(model.head.dropout)}};
  head.tensors = {std::move(w), std::move(b), std::move(d)};
  wc.layers.push_back(std::move(head));

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_container(wc, path);

  const json meta{{"variant", std::string(to_string(model.variant))},
                  {"num_classes", model.head.num_classes},
                  {"class_names", model.class_names},
                  {"input_size", model.input_size()},
                  {"preprocessing", preprocessing_json(model.preprocessing)},
                  {"created", utc_now()},
                  {"head_params", model.head.param_count()}};
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  out << meta.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + sidecar_path(path).string());
}

ClassifierModel load_checkpoint(const fs::path& path, std::optional<fs::path> registry_dir) {
  const auto meta_path = sidecar_path(path);
  json meta;
  {
    std::ifstream in(meta_path);
    if (!in) throw Error(ErrorKind::kLoad, "checkpoint sidecar missing: " + meta_path.string());
    try {
      meta = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kLoad, meta_path.string() + ": " + e.what());
    }
  }
  WeightContainer wc;
  try {
    wc = read_container(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::kLoad, path.string() + ": " + e.what());
  }

  std::string variant_name;
  int num_classes = 0;
  std::vector<std::string> class_names;
  try {
    variant_name = meta.at("variant").get<std::string>();
    num_classes = meta.at("num_classes").get<int>();
    class_names = meta.at("class_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kLoad, meta_path.string() + ": " + e.what());
  }
  const auto variant = parse_variant(variant_name);
  if (!variant) throw Error(ErrorKind::kLoad, meta_path.string() + ": unknown variant '" + variant_name + "'");
  if (wc.tag != "classifier/" + variant_name) {
    throw Error(ErrorKind::kLoad, path.string() + ": tag '" + wc.tag + "' does not match variant " + variant_name);
  }
  if (static_cast<int>(class_names.size()) != num_classes) {
    throw Error(ErrorKind::kLoad, meta_path.string() + ": class_names does not have num_classes entries");
  }
  const auto* bb = wc.find("backbone");
  const auto* head = wc.find("head");
  if (!bb || bb->attrs.size() != 5) throw Error(ErrorKind::kLoad, path.string() + ": missing backbone record");
  if (!head || head->attrs.size() != 2 || head->tensors.size() != 3) {
    throw Error(ErrorKind::kLoad, path.string() + ": missing head record");
  }
  const std::uint64_t seed =
      static_cast<std::uint32_t>(bb->attrs[3]) | (static_cast<std::uint64_t>(static_cast<std::uint32_t>(bb->attrs[4])) << 32);

  ClassifierModel model;
  model.variant = *variant;
  model.backbone = make_backbone(*variant, bb->attrs[0] == 1 ? BackboneSource::kStub : BackboneSource::kRegistry,
                                 registry_dir, seed);
  model.preprocessing = reference_arch(*variant).preprocessing;
  model.class_names = std::move(class_names);
  auto& h = model.head;
  h.in_features = head->attrs[0];
  h.num_classes = head->attrs[1];
  if (h.in_features != model.backbone->feature_width() || h.num_classes != num_classes) {
    throw Error(ErrorKind::kLoad, path.string() + ": head shape does not match the backbone or sidecar");
  }
  const std::vector<std::uint32_t> wshape{static_cast<std::uint32_t>(h.in_features),
                                          static_cast<std::uint32_t>(h.num_classes)};
  if (head->tensors[0].shape != wshape ||
      head->tensors[1].shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(h.num_classes)}) {
    throw Error(ErrorKind::kLoad, path.string() + ": head tensors are mis-shaped");
  }
  h.weights = head->tensors[0].values;
  h.bias = head->tensors[1].values;
  h.dropout = head->tensors[2].values.empty() ? 0.0 : head->tensors[2].values[0];
  return model;
}

}  // namespace forgeguard::model_zoo
