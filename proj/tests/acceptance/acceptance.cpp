// Acceptance suite: one PASS/FAIL line per primary criterion, each with its
// runtime budget. Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "forgeguard/cli/cli.hpp"
#include "forgeguard/codec/codec.hpp"
#include "forgeguard/dataset/pipeline.hpp"
#include "forgeguard/evaluation/metrics.hpp"
#include "forgeguard/imaging/geometry.hpp"
#include "forgeguard/imaging/transform.hpp"
#include "forgeguard/model_zoo/classifier.hpp"
#include "forgeguard/model_zoo/registry.hpp"
#include "forgeguard/model_zoo/scaling.hpp"
#include "forgeguard/service/service.hpp"
#include "forgeguard/training/trainer.hpp"
#include "oracles/cascade_oracles.hpp"
#include "oracles/geometry_oracles.hpp"
#include "oracles/scaling_oracles.hpp"
#include "oracles/split_oracles.hpp"

using namespace forgeguard;
namespace fs = std::filesystem;
using imaging::Box;
using imaging::ImageBuffer;

namespace {

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++count_;
  }
  bool ok() const { return count_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(count_) + " check(s) failed";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }

 private:
  std::vector<std::string> failures_;
  int count_ = 0;
};

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(10);
  o << v;
  return o.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "fg_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

model_zoo::ClassifierOptions stub_options(std::uint64_t seed = 0) {
  model_zoo::ClassifierOptions opt;
  opt.source = model_zoo::BackboneSource::kStub;
  opt.seed = seed;
  return opt;
}

// 1. Head and total parameter counts.
void head_parameter_counts(Checker& ck) {
  using model_zoo::BackboneVariant;
  struct Row {
    BackboneVariant variant;
    int classes;
    std::int64_t trainable;
    std::int64_t total;
  };
  const Row rows[] = {{BackboneVariant::kEfficientNetB4, 3, 5379, 17'679'199},
                      {BackboneVariant::kResNet50, 2, 4098, 23'591'810},
                      {BackboneVariant::kVgg16, 2, 1026, 14'715'714}};
  const auto dir = scratch("registry");
  model_zoo::ModelRegistry registry(dir);
  for (const auto& r : rows) {
    const std::string name(model_zoo::to_string(r.variant));
    const auto stub = model_zoo::build_classifier(r.variant, r.classes, stub_options());
    ck.expect(stub.head.param_count() == r.trainable, name + " head params " + std::to_string(stub.head.param_count()));

    // Reference backbone with placeholder weights: the counts depend only on
    // the architecture.
    registry.add(name, model_zoo::random_backbone_weights(model_zoo::reference_arch(r.variant), 1));
    model_zoo::ClassifierOptions opt;
    opt.registry_dir = dir;
    const auto model = model_zoo::build_classifier(r.variant, r.classes, opt);
    const auto c = model_zoo::count_params(model);
    ck.expect(c.trainable == r.trainable, name + " trainable " + std::to_string(c.trainable));
    ck.expect(c.total == r.total, name + " total " + std::to_string(c.total));
    fs::remove(dir / (name + ".fgw"));
  }
  fs::remove_all(dir);
}

// 2. Arithmetic of a reference per-class report.
void report_table_consistency(Checker& ck) {
  ck.expect(std::abs(evaluation::f1_score(0.9666, 0.6826) - 0.8002) <= 1e-4, "f1(0.9666, 0.6826)");

  const double precision[] = {0.9666, 0.7505, 0.8915};
  const std::int64_t support[] = {5684, 5492, 270};
  double macro = 0, weighted = 0;
  for (int c = 0; c < 3; ++c) {
    macro += precision[c] / 3;
    weighted += precision[c] * support[c] / 11446.0;
  }
  ck.expect(std::abs(macro - 0.8695) <= 5e-4, "macro precision of rows " + fmt(macro));
  ck.expect(std::abs(weighted - 0.8611) <= 5e-4, "weighted precision of rows " + fmt(weighted));

  const std::vector<evaluation::ReportedClass> rows{
      {"real", 0.6826, 5684}, {"fake", 0.9752, 5492}, {"plastic", 0.9741, 270}};
  const auto rec = evaluation::reconstruct_counts(rows, 0.8299);
  ck.expect(rec.diagonal == std::vector<std::int64_t>{3880, 5356, 263}, "reconstructed diagonal");
  ck.expect(std::abs(rec.accuracy - 0.8299) <= 5e-4, "reconstructed accuracy " + fmt(rec.accuracy));
  ck.expect(rec.consistent, "reconstruction verdict");

  // The same figures through report() on a full matrix consistent with the
  // table (column sums = diagonal / precision).
  const evaluation::ConfusionMatrix m{{"real", "fake", "plastic"},
                                      {{3880, 1777, 27}, {131, 5356, 5}, {3, 4, 263}}};
  const auto r = evaluation::report(m);
  ck.expect(r.total_support == 11446, "matrix support");
  ck.expect(std::abs(r.accuracy - 0.8299) <= 5e-4, "report accuracy " + fmt(r.accuracy));
  ck.expect(std::abs(r.macro_avg.precision - 0.8695) <= 5e-4, "report macro precision " + fmt(r.macro_avg.precision));
  ck.expect(std::abs(r.weighted_avg.precision - 0.8611) <= 5e-4,
            "report weighted precision " + fmt(r.weighted_avg.precision));
}

// 3. Geometry against brute-force oracles.
void geometry_oracles(Checker& ck) {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> count(0, 10);
  std::uniform_real_distribution<double> thr(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const auto input = oracle::random_candidates(rng, count(rng));
    const double th = thr(rng);
    ck.expect(imaging::nms(input, th) == oracle::brute_force_nms(input, th), "nms instance " + std::to_string(t));
  }
  for (int t = 0; t < 10000; ++t) {
    const Box a = oracle::random_box(rng), b = oracle::random_box(rng);
    const double v = imaging::iou(a, b);
    ck.expect(v == imaging::iou(b, a), "iou symmetry");
    ck.expect(v >= 0.0 && v <= 1.0, "iou range");
    ck.expect(std::abs(v - oracle::corner_iou(a, b)) <= 1e-12, "iou oracle");
  }
  std::uniform_int_distribution<int> dim(1, 4000);
  std::uniform_real_distribution<double> factor(0.3, 0.95);
  for (int t = 0; t < 1000; ++t) {
    const int w = dim(rng), h = dim(rng);
    const double f = factor(rng);
    ck.expect(static_cast<int>(imaging::pyramid_scales(w, h, f, imaging::kPyramidMinSize).size()) ==
                  oracle::pyramid_level_count(w, h, f, imaging::kPyramidMinSize),
              "pyramid levels " + std::to_string(w) + "x" + std::to_string(h));
  }
}

// 4. Resize tiers, margins, split apportionment.
void preprocessing_rules(Checker& ck) {
  const std::pair<int, double> table[] = {{250, 2.0},   {300, 1.0},  {999, 1.0},      {1000, 0.5},
                                          {1899, 0.5}, {1900, 1 / 3.0}, {2100, 1 / 3.0}};
  for (auto [w, s] : table) ck.expect(imaging::resize_rule(w) == s, "resize_rule(" + std::to_string(w) + ")");

  ck.expect(imaging::expand_margin({100, 100, 100, 100}, 0.30, 1000, 1000) == Box{70, 70, 160, 160}, "margin interior");
  ck.expect(imaging::expand_margin({0, 0, 100, 100}, 0.30, 1000, 1000) == Box{0, 0, 130, 130}, "margin clip origin");
  ck.expect(imaging::expand_margin({900, 950, 100, 50}, 0.30, 1000, 1000) == Box{870, 935, 130, 65},
            "margin clip far edge");

  std::mt19937_64 rng(99);
  for (int t = 0; t < 200; ++t) {
    std::vector<dataset::LabeledItem> items;
    std::array<std::size_t, 3> n{};
    for (int c = 0; c < 3; ++c) {
      n[c] = rng() % 60;
      for (std::size_t i = 0; i < n[c]; ++i) {
        items.push_back({std::to_string(c) + "/" + std::to_string(i), dataset::kAllLabels[c], {}, {}});
      }
    }
    std::shuffle(items.begin(), items.end(), rng);
    const auto seed = rng();
    const auto m = dataset::stratified_split(items, {7, 2, 1}, seed);
    ck.expect(m == dataset::stratified_split(items, {7, 2, 1}, seed), "split determinism");
    const auto counts = dataset::class_counts(m);
    for (int c = 0; c < 3; ++c) {
      const auto want = oracle::largest_remainder(n[c], {7, 2, 1});
      for (int s = 0; s < 3; ++s) {
        const auto it = counts.find({dataset::kAllLabels[c], dataset::kAllSplits[s]});
        const std::size_t got = it == counts.end() ? 0 : it->second;
        ck.expect(got == want[s], "split size class " + std::to_string(c) + " of " + std::to_string(n[c]));
      }
    }
  }
}

// 5. Compound scaling arithmetic.
void scaling_math(Checker& ck) {
  using namespace model_zoo;
  const auto base = compose_network({{{OperatorKind::kBlock, 3, 1, 0, "a"}, 2, {32, 32, 64}},
                                     {{OperatorKind::kBlock, 3, 2, 0, "b"}, 3, {16, 16, 128}},
                                     {{OperatorKind::kBlock, 3, 2, 0, "c"}, 2, {8, 8, 256}}},
                                    {32, 32, 32});
  ck.expect(apply_scaling(base, {1, 1, 1}) == base, "identity scaling");

  std::mt19937 rng(8);
  std::uniform_real_distribution<double> coef(1.0, 2.5), bump(0.0, 0.5);
  for (int t = 0; t < 300; ++t) {
    const ScalingCoefficients a{coef(rng), coef(rng), coef(rng)};
    const ScalingCoefficients b{a.depth + bump(rng), a.width + bump(rng), a.resolution + bump(rng)};
    const auto sa = apply_scaling(base, a), sb = apply_scaling(base, b);
    ck.expect(estimate_flops(sb) >= estimate_flops(sa), "flops monotone");
    ck.expect(estimate_memory(sb) >= estimate_memory(sa), "memory monotone");
    for (std::size_t i = 0; i < sa.stages.size(); ++i) {
      ck.expect(sb.stages[i].repeats >= sa.stages[i].repeats, "repeats monotone");
      ck.expect(sb.stages[i].out_shape.channels >= sa.stages[i].out_shape.channels, "channels monotone");
      ck.expect(sb.stages[i].out_shape.height >= sa.stages[i].out_shape.height, "resolution monotone");
    }
  }

  std::vector<ScalingCoefficients> grid;
  for (double d : {1.0, 1.2, 1.5})
    for (double w : {1.0, 1.1, 1.3})
      for (double r : {1.0, 1.15, 1.3}) grid.push_back({d, w, r});
  const auto f0 = estimate_flops(base), m0 = estimate_memory(base);
  for (int t = 0; t < 50; ++t) {
    const ResourceBudget budget{static_cast<std::int64_t>(m0 * (1.0 + (rng() % 300) / 100.0)),
                                static_cast<std::int64_t>(f0 * (1.0 + (rng() % 500) / 100.0))};
    const auto score = flops_utilization(budget);
    const auto want = oracle::best_grid_index(base, budget, grid, score);
    if (!want) {
      ck.expect(false, "oracle found no feasible point");
      continue;
    }
    ck.expect(search_scaling(base, budget, grid, score).coefficients == grid[*want], "search vs exhaustive");
  }

  const auto one = compose_network({{{OperatorKind::kConv, 3, 1, 0, "c"}, 1, {16, 16, 8}}}, {16, 16, 3});
  ck.expect(estimate_flops(one) == 55'296, "flops fixture " + std::to_string(estimate_flops(one)));
  ck.expect(estimate_flops(one) == oracle::conv_macs(3, 3, 8, 16, 16, 1), "flops fixture oracle");
  for (int rep = 1; rep <= 12; ++rep) {
    auto s = base;
    s.stages[1].repeats = rep;
    auto s1 = s;
    s1.stages[1].repeats = rep + 1;
    ck.expect(estimate_flops(s1) - estimate_flops(s) == oracle::conv_macs(3, 64, 128, 16, 16, 1), "flops linear");
  }
}

// 6. Head training at desk scale.
void training_correctness(Checker& ck) {
  // Gradient against central differences.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int F = 9, K = 3;
  std::vector<double> w(F * K), b(K);
  for (auto& v : w) v = u(rng);
  for (auto& v : b) v = u(rng);
  std::vector<float> x(F);
  for (auto& v : x) v = static_cast<float>(2 * u(rng));
  double worst = 0;
  for (int label = 0; label < K; ++label) {
    std::vector<double> gw(F * K), gb(K);
    training::head_loss_and_gradient(w, b, x, label, gw, gb);
    auto probe = [&](std::vector<double>& p, const std::vector<double>& g) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i], h = 1e-6;
        p[i] = keep + h;
        const double up = training::head_loss(w, b, x, label);
        p[i] = keep - h;
        const double down = training::head_loss(w, b, x, label);
        p[i] = keep;
        const double num = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(g[i] - num) / std::max({std::abs(g[i]), std::abs(num), 1e-12}));
      }
    };
    probe(w, gw);
    probe(b, gb);
  }
  ck.expect(worst < 1e-4, "gradient relative error " + fmt(worst));

  // Separable solid colours, stub backbone, 5 epochs.
  const auto root = scratch("separable");
  std::mt19937 img_rng(7);
  std::uniform_int_distribution<int> jitter(-30, 30);
  std::vector<dataset::LabeledItem> items;
  const std::pair<dataset::ClassLabel, std::array<int, 3>> classes[] = {{dataset::ClassLabel::kReal, {200, 60, 60}},
                                                                        {dataset::ClassLabel::kFake, {60, 60, 200}}};
  for (const auto& [label, rgb] : classes) {
    fs::create_directories(root / std::string(dataset::to_string(label)));
    for (int i = 0; i < 150; ++i) {
      ImageBuffer img(16, 16, 3);
      for (int y = 0; y < 16; ++y)
        for (int xx = 0; xx < 16; ++xx)
          for (int c = 0; c < 3; ++c) img.at(xx, y, c) = static_cast<std::uint8_t>(std::clamp(rgb[c] + jitter(img_rng), 0, 255));
      const std::string rel = std::string(dataset::to_string(label)) + "/" + std::to_string(i) + ".png";
      codec::write_png(img, root / rel);
      items.push_back({rel, label, {}, {}});
    }
  }
  const auto manifest = dataset::stratified_split(items, {7, 2, 1}, 11);
  auto model = model_zoo::build_classifier(model_zoo::BackboneVariant::kResNet50, 2, stub_options(5));
  ImageBuffer probe(40, 40, 3);
  for (int y = 0; y < 40; ++y)
    for (int xx = 0; xx < 40; ++xx)
      for (int c = 0; c < 3; ++c) probe.at(xx, y, c) = static_cast<std::uint8_t>((xx * 7 + y * 13 + c * 50) % 256);
  const auto before = model.extract(probe);
  const auto backbone = model.backbone;
  training::TrainConfig config;
  config.epochs = 5;
  config.seed = 1;
  const auto start = std::chrono::steady_clock::now();
  const auto result = training::train(model, manifest, root, config);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ck.expect(secs < 300, "training took " + fmt(secs) + " s");
  ck.expect(result.history.records.size() == 5, "epoch count");
  ck.expect(!result.history.records.empty() && result.history.records.back().val_acc >= 0.95,
            "final val_acc " + fmt(result.history.records.empty() ? 0 : result.history.records.back().val_acc));
  const auto after = model.extract(probe);
  ck.expect(model.backbone == backbone && after.size() == before.size() &&
                std::memcmp(after.data(), before.data(), after.size() * sizeof(float)) == 0,
            "backbone features changed");
  fs::remove_all(root);

  // Scripted plateau.
  training::TrainConfig plateau;
  plateau.epochs = 10;
  plateau.early_stop.patience = 2;
  const double losses[] = {0.5, 0.4, 0.3, 0.3, 0.3, 0.2, 0.1, 0.1, 0.1, 0.1};
  const auto h = training::run_epochs(plateau, [&](int e) { return training::EpochRecord{e, 0.1, 0.5, losses[e - 1], 0.5}; });
  ck.expect(h.stopped_early, "plateau did not stop");
  ck.expect(h.best_epoch == 3, "plateau best epoch " + std::to_string(h.best_epoch));
  ck.expect(h.records.size() == 5, "plateau records " + std::to_string(h.records.size()));
}

// 7. prep -> split -> train -> eval through the CLI, then the service.
void end_to_end(Checker& ck) {
  const auto dir = scratch("e2e");
  setenv("FORGEGUARD_MODEL_CACHE", (dir / "cache").c_str(), 1);
  auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    ck.expect(code == 0, args[0] + " exited " + std::to_string(code) + ": " + err.str());
    return out.str();
  };

  // Planted "faces" for two classes: one square per real frame, two per fake frame.
  for (const char* label : {"real", "fake"}) {
    const bool fake = std::strcmp(label, "fake") == 0;
    fs::create_directories(dir / "raw" / label);
    std::vector<ImageBuffer> frames;
    for (int i = 0; i < 24; ++i) {
      frames.push_back(fake ? oracle::planted_squares(320, 240, {Box{30.0 + 2 * i, 40, 60, 60}, Box{200, 120, 64, 64}}, 60)
                            : oracle::planted_squares(320, 240, {Box{100.0 + 3 * i, 80, 70, 70}}));
    }
    codec::write_video(dir / "raw" / label / "clip.avi", frames, 10.0);
    run({"prep", "--videos", (dir / "raw" / label).string(), "--label", label, "--out", (dir / "data").string(),
         "--every-nth", "2"});
  }
  run({"split", "--manifest", (dir / "data" / "inventory.jsonl").string(), "--seed", "3"});
  run({"train", "--manifest", (dir / "data" / "manifest.jsonl").string(), "--variant", "vgg16", "--classes", "2",
       "--epochs", "3", "--backbone", "stub", "--out", (dir / "run").string()});
  const auto table = run({"eval", "--manifest", (dir / "data" / "manifest.jsonl").string(), "--checkpoint",
                          (dir / "run" / "model.fgw").string(), "--out", (dir / "run" / "report.json").string()});
  for (const char* needle : {"precision", "recall", "f1-score", "support", "accuracy", "macro avg", "weighted avg"}) {
    ck.expect(table.find(needle) != std::string::npos, std::string("report table lacks ") + needle);
  }
  ck.expect(fs::exists(dir / "run" / "report.json"), "report JSON");
  ck.expect(fs::exists(dir / "run" / "curves.png") && fs::file_size(dir / "run" / "curves.png") > 0, "curve image");

  const auto model = model_zoo::load_checkpoint(dir / "run" / "model.fgw");
  cascade::CascadeDetector detector(cascade::marker_stage_set());
  const auto blank = codec::encode_image(ImageBuffer::filled(200, 160, 3, 0), codec::ImageFormat::kPng);
  const auto none = service::handle_detect({blank, "png"}, model, detector);
  ck.expect(!none.face_found && none.message == std::string("No face found in the uploaded image."), "no-face message");
  const auto face =
      codec::encode_image(oracle::planted_squares(320, 240, {Box{100, 60, 80, 80}}), codec::ImageFormat::kPng);
  const auto found = service::handle_detect({face, "png"}, model, detector);
  double sum = 0;
  for (const auto& [_, p] : found.probabilities) sum += p;
  ck.expect(found.face_found, "face fixture not found");
  ck.expect(std::abs(sum - 1.0) <= 1e-6, "probability sum " + fmt(sum));
  fs::remove_all(dir);
}

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<void(Checker&)> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"head-parameter-counts", 60, head_parameter_counts},
      {"report-table-consistency", 1, report_table_consistency},
      {"geometry-oracles", 30, geometry_oracles},
      {"preprocessing-rules", 10, preprocessing_rules},
      {"scaling-math", 10, scaling_math},
      {"training-correctness", 300, training_correctness},
      {"end-to-end-smoke", 600, end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Checker ck;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(ck);
    } catch (const std::exception& e) {
      ck.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ck.expect(secs <= c.budget_seconds, "over budget");
    char timing[64];
    std::snprintf(timing, sizeof timing, "(%.2f s, budget %.0f s)", secs, c.budget_seconds);
    if (ck.ok()) {
      std::cout << "PASS " << c.name << " " << timing << std::endl;
    } else {
      ++failed;
      std::cout << "FAIL " << c.name << " " << timing << ": " << ck.summary() << std::endl;
    }
  }
  return failed == 0 ? 0 : 1;
}
