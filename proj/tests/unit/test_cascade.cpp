#include <doctest.h>

#include <fstream>
#include <filesystem>
#include <random>

#include "forgeguard/cascade/detector.hpp"
#include "forgeguard/cascade/remote.hpp"
#include "forgeguard/cascade/stage.hpp"
#include "forgeguard/codec/codec.hpp"
#include "forgeguard/core/encoding.hpp"
#include "forgeguard/core/error.hpp"
#include "forgeguard/imaging/geometry.hpp"
#include "oracles/cascade_oracles.hpp"
#include "oracles/geometry_oracles.hpp"

using namespace forgeguard;
using namespace forgeguard::cascade;
using imaging::Box;
using imaging::ImageBuffer;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fg_test_cascade";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ImageBuffer noise_patch(std::mt19937& rng, int size) {
  ImageBuffer img(size, size, 3);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

Tensor random_tensor(std::mt19937& rng, std::vector<std::uint32_t> shape, float scale) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::normal_distribution<float> n(0.0f, scale);
  for (auto& v : t.values) v = n(rng);
  return t;
}

LayerRecord layer(std::string name, StageLayerKind kind, std::vector<std::int32_t> attrs, std::vector<Tensor> tensors) {
  return {std::move(name), static_cast<std::uint32_t>(kind), std::move(attrs), std::move(tensors)};
}

// Randomly initialized networks with the canonical cascade layer shapes.
WeightContainer random_proposal_net(unsigned seed) {
  std::mt19937 rng(seed);
  WeightContainer c;
  c.tag = "cascade/proposal";
  Tensor norm = Tensor::zeros({2});
  norm.values = {127.5f, 0.0078125f};
  c.layers.push_back(layer("norm", StageLayerKind::kInputScale, {}, {norm}));
  c.layers.push_back(layer("conv1", StageLayerKind::kConv2d, {1},
                           {random_tensor(rng, {3, 3, 3, 10}, 0.3f), random_tensor(rng, {10}, 0.1f)}));
  c.layers.push_back(layer("prelu1", StageLayerKind::kPrelu, {}, {random_tensor(rng, {10}, 0.2f)}));
  c.layers.push_back(layer("pool1", StageLayerKind::kMaxPool, {2, 2}, {}));
  c.layers.push_back(layer("conv2", StageLayerKind::kConv2d, {1},
                           {random_tensor(rng, {3, 3, 10, 16}, 0.2f), random_tensor(rng, {16}, 0.1f)}));
  c.layers.push_back(layer("prelu2", StageLayerKind::kPrelu, {}, {random_tensor(rng, {16}, 0.2f)}));
  c.layers.push_back(layer("conv3", StageLayerKind::kConv2d, {1},
                           {random_tensor(rng, {3, 3, 16, 32}, 0.15f), random_tensor(rng, {32}, 0.1f)}));
  c.layers.push_back(layer("prelu3", StageLayerKind::kPrelu, {}, {random_tensor(rng, {32}, 0.2f)}));
  c.layers.push_back(layer("cls", StageLayerKind::kHead, {0},
                           {random_tensor(rng, {32, 2}, 0.3f), random_tensor(rng, {2}, 0.1f)}));
  c.layers.push_back(layer("box", StageLayerKind::kHead, {1},
                           {random_tensor(rng, {32, 4}, 0.1f), random_tensor(rng, {4}, 0.05f)}));
  return c;
}

WeightContainer random_output_net(unsigned seed) {
  std::mt19937 rng(seed);
  WeightContainer c;
  c.tag = "cascade/output";
  c.layers.push_back(layer("conv1", StageLayerKind::kConv2d, {2},
                           {random_tensor(rng, {3, 3, 3, 8}, 0.01f), random_tensor(rng, {8}, 0.1f)}));
  c.layers.push_back(layer("prelu1", StageLayerKind::kPrelu, {}, {random_tensor(rng, {8}, 0.2f)}));
  c.layers.push_back(layer("pool1", StageLayerKind::kMaxPool, {3, 2}, {}));
  // 48 -> conv s2 -> 23 -> pool(3,2) ceil -> 11
  c.layers.push_back(layer("fc", StageLayerKind::kDense, {},
                           {random_tensor(rng, {11 * 11 * 8, 16}, 0.05f), random_tensor(rng, {16}, 0.1f)}));
  c.layers.push_back(layer("prelu2", StageLayerKind::kPrelu, {}, {random_tensor(rng, {16}, 0.2f)}));
  c.layers.push_back(layer("cls", StageLayerKind::kHead, {0},
                           {random_tensor(rng, {16, 2}, 0.3f), random_tensor(rng, {2}, 0.1f)}));
  c.layers.push_back(layer("box", StageLayerKind::kHead, {1},
                           {random_tensor(rng, {16, 4}, 0.1f), random_tensor(rng, {4}, 0.05f)}));
  c.layers.push_back(layer("lm", StageLayerKind::kHead, {2},
                           {random_tensor(rng, {16, 10}, 0.1f), random_tensor(rng, {10}, 0.05f)}));
  return c;
}

template <typename F>
ErrorKind kind_of_failure(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

class ThrowingStage : public StageBackend {
 public:
  StageRole role() const override { return StageRole::kRefine; }
  StageOutput evaluate(const ImageBuffer&) const override { throw std::runtime_error("weights on fire"); }
  WeightContainer to_container() const override { return {}; }
};

class RecordingTransport : public HttpTransport {
 public:
  explicit RecordingTransport(HttpResponse canned) : canned_(std::move(canned)) {}
  HttpResponse post(const HttpRequest& request) override {
    requests.push_back(request);
    return canned_;
  }
  std::vector<HttpRequest> requests;

 private:
  HttpResponse canned_;
};

const char* kOneFace = R"([{"faceId":"x","faceRectangle":{"top":20,"left":30,"width":40,"height":44},
  "faceLandmarks":{"pupilLeft":{"x":40,"y":35},"pupilRight":{"x":60,"y":35},"noseTip":{"x":50,"y":45},
  "mouthLeft":{"x":42,"y":55},"mouthRight":{"x":58,"y":56}}}])";

}  // namespace

TEST_CASE("stage roles and sizes") {
  CHECK(input_size(StageRole::kProposal) == 12);
  CHECK(input_size(StageRole::kRefine) == 24);
  CHECK(input_size(StageRole::kOutput) == 48);
  CHECK(parse_role("refine") == StageRole::kRefine);
  CHECK_FALSE(parse_role("onet").has_value());
  CHECK(to_string(StageRole::kOutput) == "output");
}

TEST_CASE("box regression examples") {
  const Box b{3, 4, 17, 9};
  CHECK(apply_box_regression(b, {0, 0, 0, 0}) == b);
  const Box r = apply_box_regression({0, 0, 10, 10}, {0.1, 0.1, -0.1, -0.1});
  CHECK(r.x == doctest::Approx(1.0));
  CHECK(r.y == doctest::Approx(1.0));
  CHECK(r.w == doctest::Approx(8.0));
  CHECK(r.h == doctest::Approx(8.0));
}

TEST_CASE("box regression matches corner oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> off(-0.8, 0.8);
  for (int i = 0; i < 2000; ++i) {
    const Box b = oracle::random_box(rng, 300.0, 120.0);
    const std::array<double, 4> d{off(rng), off(rng), off(rng), off(rng)};
    const Box got = apply_box_regression(b, d);
    const Box want = oracle::regress_corners(b, d);
    CHECK(got.x == doctest::Approx(want.x).epsilon(1e-12));
    CHECK(got.y == doctest::Approx(want.y).epsilon(1e-12));
    CHECK(got.w == doctest::Approx(want.w).epsilon(1e-12));
    CHECK(got.h == doctest::Approx(want.h).epsilon(1e-12));
    CHECK(got.w >= 0.0);
    CHECK(got.h >= 0.0);
  }
}

TEST_CASE("landmarks decode as box fractions") {
  const auto lm = decode_landmarks({10, 20, 100, 50}, kMarkerLandmarks);
  CHECK(lm.left_eye.x == doctest::Approx(40.0));
  CHECK(lm.left_eye.y == doctest::Approx(37.5));
  CHECK(lm.mouth_right.x == doctest::Approx(75.0));
  CHECK(lm.mouth_right.y == doctest::Approx(57.5));
}

TEST_CASE("square_box keeps the center") {
  const Box s = square_box({10, 10, 20, 10});
  CHECK(s == Box{10, 5, 20, 20});
  const Box already{1.25, 3.5, 7.75, 7.75};
  CHECK(square_box(already) == already);
}

TEST_CASE("marker rule scores") {
  MarkerStageBackend stage(StageRole::kRefine);
  CHECK(stage.evaluate(ImageBuffer::filled(24, 24, 3, 0)).classifier == 0.0);
  CHECK(stage.evaluate(ImageBuffer::filled(24, 24, 3, 255)).classifier == 0.0);
  // A 16x16 marker centered in a 24x24 patch: center full, ring dark.
  const auto framed = oracle::planted_squares(24, 24, {Box{4, 4, 16, 16}});
  const auto out = stage.evaluate(framed);
  CHECK(out.classifier == 1.0);
  // Regressed box puts the marker at kMarkerFill of the side, centered.
  const Box r = apply_box_regression({0, 0, 24, 24}, out.bbox_regress);
  CHECK(r.w == doctest::Approx(16.0 / MarkerStageBackend::kMarkerFill));
  CHECK(r.x + r.w / 2 == doctest::Approx(12.0));
  CHECK_FALSE(out.landmark_regress.has_value());
  MarkerStageBackend onet(StageRole::kOutput);
  CHECK(onet.evaluate(oracle::planted_squares(48, 48, {Box{8, 8, 32, 32}})).landmark_regress.has_value());
}

TEST_CASE("blank image yields no detections") {
  const auto stages = marker_stage_set();
  CHECK(detect_faces(ImageBuffer::filled(200, 160, 3, 0), stages).empty());
  CHECK(detect_faces(ImageBuffer::filled(200, 160, 3, 255), stages).empty());
  CHECK(detect_faces(ImageBuffer::filled(11, 40, 3, 0), stages).empty());
}

TEST_CASE("planted square is found") {
  const Box planted{100, 100, 60, 60};
  const auto img = oracle::planted_squares(320, 240, {planted});
  const auto faces = detect_faces(img, marker_stage_set());
  REQUIRE(faces.size() == 1);
  CAPTURE(faces[0].box.x);
  CAPTURE(faces[0].box.w);
  CHECK(oracle::corner_iou(faces[0].box, planted) >= 0.6);
  CHECK(faces[0].confidence >= 0.95);
  REQUIRE(faces[0].landmarks.has_value());
  CHECK(faces[0].landmarks->nose.x > planted.x);
  CHECK(faces[0].landmarks->nose.x < planted.right());
}

TEST_CASE("two separate squares are catalogued individually") {
  const Box a{40, 50, 60, 60};
  const Box b{220, 120, 70, 70};
  const auto faces = detect_faces(oracle::planted_squares(360, 260, {a, b}), marker_stage_set());
  REQUIRE(faces.size() == 2);
  const bool a_first = oracle::corner_iou(faces[0].box, a) > 0.5;
  CHECK(oracle::corner_iou(faces[a_first ? 0 : 1].box, a) >= 0.6);
  CHECK(oracle::corner_iou(faces[a_first ? 1 : 0].box, b) >= 0.6);
  CHECK(faces[0].confidence >= faces[1].confidence);
}

TEST_CASE("cascade invariants over random fixtures") {
  std::mt19937 rng(5);
  const auto stages = marker_stage_set();
  std::uniform_real_distribution<double> side(24, 90);
  std::uniform_real_distribution<double> unit(0, 1);
  int total_found = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 300, h = 220;
    std::vector<Box> planted;
    for (int k = 0; k < 3; ++k) {
      const double s = side(rng);
      planted.push_back({unit(rng) * (w - s), unit(rng) * (h - s), s, s});
    }
    auto img = oracle::planted_squares(w, h, {planted[0], planted[1], planted[2]});
    CascadeConfig cfg;
    const auto base = detect_faces(img, stages, cfg);
    total_found += static_cast<int>(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].confidence >= cfg.thresholds[2]);
      if (i > 0) CHECK(base[i - 1].confidence >= base[i].confidence);
      for (std::size_t j = i + 1; j < base.size(); ++j) {
        CHECK(imaging::iou(base[i].box, base[j].box) <= cfg.nms_thresholds[2]);
      }
    }
    // Raising any single stage threshold never adds detections.
    for (int stage = 0; stage < 3; ++stage) {
      CascadeConfig stricter = cfg;
      stricter.thresholds[stage] = std::min(1.0, cfg.thresholds[stage] + 0.2);
      CHECK(detect_faces(img, stages, stricter).size() <= base.size());
    }
  }
  CHECK(total_found > 25);
}

TEST_CASE("zero offsets pass proposal boxes through unchanged") {
  MarkerStageBackend::Options opt;
  opt.regress = false;
  opt.landmarks = false;
  const auto stages = marker_stage_set(opt);
  CascadeConfig cfg;
  cfg.thresholds = {0.5, 0.5, 0.5};
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> pos(0, 200);
  for (int trial = 0; trial < 10; ++trial) {
    const auto img = oracle::planted_squares(280, 260, {Box{pos(rng), pos(rng), 34, 34}, Box{pos(rng), 10, 50, 50}});
    CascadeTrace trace;
    const auto faces = detect_faces(img, stages, cfg, &trace);
    // Independent recomposition of stages 2 and 3 on the traced proposals.
    auto restage = [&](const std::vector<imaging::ScoredBox>& in, const StageBackend& s, double thr, double nms_thr) {
      std::vector<imaging::ScoredBox> keep;
      for (const auto& sb : in) {
        const double score = s.evaluate(imaging::crop_square_patch(img, sb.box, s.input_size())).classifier;
        if (score >= thr) keep.push_back({sb.box, score});
      }
      return oracle::brute_force_nms(keep, nms_thr);
    };
    const auto refined = restage(trace.proposals, *stages.refine, 0.5, 0.7);
    const auto expected = restage(refined, *stages.output, 0.5, 0.7);
    REQUIRE(faces.size() == expected.size());
    for (std::size_t i = 0; i < faces.size(); ++i) {
      CHECK(faces[i].box == expected[i].box);
      CHECK(faces[i].confidence == expected[i].score);
      CHECK_FALSE(faces[i].landmarks.has_value());
      const bool is_proposal = std::any_of(trace.proposals.begin(), trace.proposals.end(),
                                           [&](const auto& p) { return p.box == faces[i].box; });
      CHECK(is_proposal);
    }
  }
}

TEST_CASE("backend failures surface as detection-backend errors") {
  auto stages = marker_stage_set();
  stages.refine = std::make_shared<ThrowingStage>();
  const auto img = oracle::planted_squares(200, 200, {Box{50, 50, 60, 60}});
  CHECK(kind_of_failure([&] { detect_faces(img, stages); }) == ErrorKind::kDetectionBackend);
  auto swapped = marker_stage_set();
  std::swap(swapped.refine, swapped.output);
  CHECK(kind_of_failure([&] { detect_faces(img, swapped); }) == ErrorKind::kRole);
  CascadeConfig bad;
  bad.thresholds[1] = 1.5;
  CHECK(kind_of_failure([&] { detect_faces(img, marker_stage_set(), bad); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("stage files round-trip") {
  std::mt19937 rng(3);
  SUBCASE("marker rule") {
    MarkerStageBackend::Options opt;
    opt.bright_threshold = 100;
    opt.regress = false;
    MarkerStageBackend original(StageRole::kRefine, opt);
    save_stage_weights(original, scratch("marker_refine.fgw"));
    const auto loaded = load_stage_weights(scratch("marker_refine.fgw"), StageRole::kRefine);
    for (int i = 0; i < 100; ++i) {
      auto patch = oracle::planted_squares(24, 24, {Box{double(rng() % 8), double(rng() % 8), 14, 14}});
      const auto a = original.evaluate(patch);
      const auto b = loaded->evaluate(patch);
      CHECK(a.classifier == b.classifier);
      CHECK(a.bbox_regress == b.bbox_regress);
    }
  }
  SUBCASE("network") {
    NetworkStageBackend original(random_output_net(21));
    save_stage_weights(original, scratch("net_output.fgw"));
    const auto loaded = load_stage_weights(scratch("net_output.fgw"), StageRole::kOutput);
    for (int i = 0; i < 100; ++i) {
      const auto patch = noise_patch(rng, 48);
      const auto a = original.evaluate(patch);
      const auto b = loaded->evaluate(patch);
      CHECK(a.classifier == b.classifier);
      CHECK(a.bbox_regress == b.bbox_regress);
      REQUIRE(b.landmark_regress.has_value());
      CHECK(*a.landmark_regress == *b.landmark_regress);
      CHECK(a.classifier >= 0.0);
      CHECK(a.classifier <= 1.0);
    }
  }
}

TEST_CASE("stage file errors") {
  const auto path = scratch("pnet.fgw");
  write_container(random_proposal_net(1), path);
  CHECK_NOTHROW(load_stage_weights(path, StageRole::kProposal));
  CHECK(kind_of_failure([&] { load_stage_weights(path, StageRole::kRefine); }) == ErrorKind::kRole);

  auto bytes = read_file_bytes(path);
  bytes.resize(bytes.size() - 7);
  const auto truncated = scratch("pnet_truncated.fgw");
  {
    std::ofstream out(truncated, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK(kind_of_failure([&] { load_stage_weights(truncated, StageRole::kProposal); }) == ErrorKind::kLoad);

  auto bad = random_proposal_net(1);
  bad.layers[4].tensors[0] = Tensor::zeros({3, 3, 12, 16});
  try {
    stage_from_container(bad, StageRole::kProposal);
    FAIL("expected a load error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLoad);
    CHECK(std::string(e.what()).find("conv2") != std::string::npos);
  }
  auto headless = random_proposal_net(1);
  headless.layers.pop_back();
  CHECK(kind_of_failure([&] { stage_from_container(headless, StageRole::kProposal); }) == ErrorKind::kLoad);
  auto untagged = random_proposal_net(1);
  untagged.tag = "something";
  CHECK(kind_of_failure([&] { stage_from_container(untagged, StageRole::kProposal); }) == ErrorKind::kLoad);
}

TEST_CASE("convolutional scan agrees with window-by-window evaluation") {
  NetworkStageBackend net(random_proposal_net(7));
  CHECK(net.native_stride() == 2);
  std::mt19937 rng(4);
  ImageBuffer img(37, 29, 3);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng() & 0xFF);
  const auto dense = net.scan(img, 2);
  const auto windows = net.StageBackend::scan(img, 2);
  REQUIRE(dense.size() == windows.size());
  REQUIRE(dense.size() == 13u * 9u);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    CHECK(dense[i].x == windows[i].x);
    CHECK(dense[i].y == windows[i].y);
    CHECK(dense[i].output.classifier == doctest::Approx(windows[i].output.classifier).epsilon(1e-5));
    for (int k = 0; k < 4; ++k) {
      CHECK(dense[i].output.bbox_regress[k] == doctest::Approx(windows[i].output.bbox_regress[k]).epsilon(1e-4));
    }
  }
  // Any other stride falls back to explicit windows.
  CHECK(net.scan(img, 3).size() == 9u * 6u);
}

TEST_CASE("stage sets save and load") {
  const auto dir = scratch("stages");
  save_stage_set(marker_stage_set(), dir);
  const auto loaded = load_stage_set(dir);
  const auto img = oracle::planted_squares(240, 200, {Box{60, 40, 64, 64}});
  CHECK(detect_faces(img, loaded) == detect_faces(img, marker_stage_set()));
  CascadeDetector detector(loaded);
  CHECK(detector.detect(img).size() == 1);
}

TEST_CASE("remote validation happens before any request") {
  RecordingTransport transport({200, kOneFace});
  RemoteServiceConfig cfg;
  cfg.endpoint = "https://faces.invalid/detect";
  cfg.api_key = "k";

  SUBCASE("5 MB JPEG is too large") {
    std::mt19937 rng(1);
    ImageBuffer big(1700, 1600, 3);
    for (auto& p : big.pixels()) p = static_cast<std::uint8_t>(rng() & 0xFF);
    const auto jpeg = codec::encode_image(big, codec::ImageFormat::kJpeg, 100);
    REQUIRE(jpeg.size() >= 5'000'000u);
    CHECK(kind_of_failure([&] { remote_detect(jpeg, "jpeg", cfg, transport); }) == ErrorKind::kPayloadTooLarge);
  }
  SUBCASE("40x40 PNG is too small") {
    const auto png = codec::encode_image(ImageBuffer::filled(40, 40, 3, 90), codec::ImageFormat::kPng);
    CHECK(kind_of_failure([&] { remote_detect(png, "png", cfg, transport); }) == ErrorKind::kImageTooSmall);
  }
  SUBCASE("exactly 50 px is still too small") {
    const auto png = codec::encode_image(ImageBuffer::filled(50, 80, 3, 90), codec::ImageFormat::kPng);
    CHECK(kind_of_failure([&] { remote_detect(png, "png", cfg, transport); }) == ErrorKind::kImageTooSmall);
  }
  SUBCASE("unsupported format") {
    const auto png = codec::encode_image(ImageBuffer::filled(80, 80, 3, 90), codec::ImageFormat::kPng);
    CHECK(kind_of_failure([&] { remote_detect(png, "image/webp", cfg, transport); }) ==
          ErrorKind::kUnsupportedFormat);
    RemoteServiceConfig narrow = cfg;
    narrow.allowed_formats = {codec::ImageFormat::kJpeg};
    CHECK(kind_of_failure([&] { remote_detect(png, "png", narrow, transport); }) == ErrorKind::kUnsupportedFormat);
  }
  CHECK(transport.requests.empty());
}

TEST_CASE("remote detection against a recorded response") {
  RecordingTransport transport({200, kOneFace});
  RemoteServiceConfig cfg;
  cfg.endpoint = "https://faces.invalid/face/v1.0/detect?returnFaceLandmarks=true";
  cfg.api_key = "secret-key";
  const auto bmp = codec::encode_image(oracle::gradient_image(120, 90, 3), codec::ImageFormat::kBmp);
  const auto faces = remote_detect(bmp, "bmp", cfg, transport);
  REQUIRE(transport.requests.size() == 1);
  const auto& req = transport.requests[0];
  CHECK(req.url == cfg.endpoint);
  CHECK(req.content_type == "application/octet-stream");
  CHECK(req.body.size() == bmp.size());
  REQUIRE(req.headers.size() == 1);
  CHECK(req.headers[0].first == "Ocp-Apim-Subscription-Key");
  CHECK(req.headers[0].second == "secret-key");
  REQUIRE(faces.size() == 1);
  CHECK(faces[0].box == Box{30, 20, 40, 44});
  CHECK(faces[0].confidence == 1.0);
  REQUIRE(faces[0].landmarks.has_value());
  CHECK(faces[0].landmarks->mouth_right == imaging::Point{58, 56});
}

TEST_CASE("remote failures carry the HTTP status") {
  const auto png = codec::encode_image(oracle::gradient_image(64, 64, 3), codec::ImageFormat::kPng);
  RemoteServiceConfig cfg;
  cfg.endpoint = "https://faces.invalid/detect";
  RecordingTransport denied({401, R"({"error":{"code":"401"}})"});
  try {
    remote_detect(png, "png", cfg, denied);
    FAIL("expected an error");
  } catch (const RemoteServiceError& e) {
    CHECK(e.status() == 401);
    CHECK(e.kind() == ErrorKind::kRemoteService);
  }
  RecordingTransport garbage({200, "<html>"});
  CHECK(kind_of_failure([&] { remote_detect(png, "png", cfg, garbage); }) == ErrorKind::kRemoteService);
  RecordingTransport empty({200, "[]"});
  CHECK(remote_detect(png, "png", cfg, empty).empty());
}

TEST_CASE("unreachable endpoint is a remote-service error with status 0") {
  auto transport = make_http_transport();
  RemoteServiceConfig cfg;
  cfg.endpoint = "http://127.0.0.1:9/detect";
  cfg.timeout_seconds = 2.0;
  const auto png = codec::encode_image(oracle::gradient_image(64, 64, 3), codec::ImageFormat::kPng);
  try {
    remote_detect(png, "png", cfg, *transport);
    FAIL("expected an error");
  } catch (const RemoteServiceError& e) {
    CHECK(e.status() == 0);
  }
}
