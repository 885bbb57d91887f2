#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "forgeguard/cli/cli.hpp"
#include "forgeguard/codec/codec.hpp"
#include "forgeguard/dataset/manifest.hpp"
#include "forgeguard/model_zoo/classifier.hpp"
#include "forgeguard/training/history.hpp"
#include "oracles/cascade_oracles.hpp"

using namespace forgeguard;
using imaging::Box;
using imaging::ImageBuffer;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "fg_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  // Keep the default model cache away from the user's.
  setenv("FORGEGUARD_MODEL_CACHE", (dir / "cache").c_str(), 1);
  return dir;
}

ImageBuffer solid(std::array<int, 3> rgb, int size = 16) {
  ImageBuffer img(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(rgb[c]);
  return img;
}

// n images per class as an inventory under root.
void write_inventory(const fs::path& root, int per_class, bool noisy) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> jitter(-25, 25);
  dataset::DatasetManifest inv;
  const std::pair<dataset::ClassLabel, std::array<int, 3>> classes[] = {{dataset::ClassLabel::kReal, {210, 50, 50}},
                                                                        {dataset::ClassLabel::kFake, {50, 50, 210}}};
  for (const auto& [label, rgb] : classes) {
    for (int i = 0; i < per_class; ++i) {
      auto img = solid(rgb);
      if (noisy) {
        for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(std::clamp(p + jitter(rng), 0, 255));
      }
      const std::string rel = std::string(dataset::to_string(label)) + "/" + std::to_string(i) + ".png";
      fs::create_directories((root / rel).parent_path());
      codec::write_png(img, root / rel);
      inv.entries.push_back({rel, label, std::nullopt, {}, {}});
    }
  }
  dataset::write_manifest(inv, root / "inventory.jsonl");
}

}  // namespace

TEST_CASE("help lists every flag and exits 0") {
  const auto top = invoke({"--help"});
  CHECK(top.code == 0);
  for (const char* cmd : {"prep", "split", "train", "eval", "curves", "serve", "detect"}) {
    CHECK(top.out.find(cmd) != std::string::npos);
  }
  const std::map<std::string, std::vector<std::string>> flags{
      {"prep", {"--videos", "--images", "--label", "--out", "--every-nth", "--max-frames", "--detector", "--stages"}},
      {"split", {"--manifest", "--seed", "--ratios", "--out"}},
      {"train",
       {"--manifest", "--variant", "--classes", "--epochs", "--batch-size", "--lr", "--patience", "--min-delta",
        "--seed", "--backbone", "--registry", "--out"}},
      {"eval", {"--manifest", "--checkpoint", "--split", "--out"}},
      {"curves", {"--history", "--out"}},
      {"serve", {"--model", "--port", "--host", "--static", "--log", "--detector"}},
      {"detect", {"--image", "--model", "--detector", "--out"}}};
  for (const auto& [cmd, names] : flags) {
    const auto r = invoke({cmd, "--help"});
    CHECK(r.code == 0);
    for (const auto& f : names) {
      CAPTURE(cmd);
      CAPTURE(f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("usage errors exit 1") {
  const auto dir = scratch("usage");
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"bogus"}).code == 1);
  CHECK(invoke({"curves", "--history", "x.csv", "--out", "y.png", "--frobnicate"}).code == 1);
  CHECK(invoke({"prep", "--images", dir.string(), "--label", "synthetic", "--out", (dir / "o").string()}).code == 1);
  CHECK(invoke({"prep", "--images", (dir / "nope").string(), "--label", "real", "--out", (dir / "o").string()}).code == 1);
  CHECK(invoke({"prep", "--label", "real", "--out", (dir / "o").string()}).code == 1);
  CHECK(invoke({"split", "--manifest", (dir / "missing.jsonl").string()}).code == 1);
}

TEST_CASE("prep on an empty directory warns and succeeds") {
  const auto dir = scratch("prep_empty");
  fs::create_directories(dir / "in");
  const auto r = invoke({"prep", "--images", (dir / "in").string(), "--label", "real", "--out", (dir / "out").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("crops: 0") != std::string::npos);
  CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("prep harvests planted faces") {
  const auto dir = scratch("prep");
  fs::create_directories(dir / "videos");
  fs::create_directories(dir / "images");
  std::vector<ImageBuffer> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(oracle::planted_squares(320, 240, {Box{100.0 + 3 * i, 80, 60, 60}}));
  codec::write_video(dir / "videos" / "clip.avi", frames, 10.0);
  codec::write_png(oracle::planted_squares(400, 300, {Box{40, 40, 70, 70}, Box{250, 150, 64, 64}}),
                   dir / "images" / "two.png");
  codec::write_png(ImageBuffer::filled(200, 200, 3, 10), dir / "images" / "none.png");
  const auto r = invoke({"prep", "--videos", (dir / "videos").string(), "--images", (dir / "images").string(), "--label",
                      "fake", "--out", (dir / "out").string(), "--every-nth", "5"});
  CHECK(r.code == 0);
  // 4 frames with one square each, plus two squares in one image.
  CHECK(r.out.find("frames: 4") != std::string::npos);
  CHECK(r.out.find("crops: 6") != std::string::npos);
  CHECK(r.out.find("inputs without faces: 1") != std::string::npos);
  const auto inv = dataset::read_manifest(dir / "out" / "inventory.jsonl", dataset::ManifestKind::kInventory);
  CHECK(inv.entries.size() == 6);
  for (const auto& e : inv.entries) CHECK(fs::exists(dir / "out" / e.path));
}

TEST_CASE("split a 10-item single-class inventory 7:2:1") {
  const auto dir = scratch("split");
  dataset::DatasetManifest inv;
  for (int i = 0; i < 10; ++i) inv.entries.push_back({"real/" + std::to_string(i) + ".png", dataset::ClassLabel::kReal, {}, {}, {}});
  dataset::write_manifest(inv, dir / "inventory.jsonl");
  const auto r = invoke({"split", "--manifest", (dir / "inventory.jsonl").string(), "--seed", "4"});
  CHECK(r.code == 0);
  const auto m = dataset::read_manifest(dir / "manifest.jsonl");
  const auto counts = dataset::class_counts(m);
  CHECK(counts.at({dataset::ClassLabel::kReal, dataset::Split::kTrain}) == 7);
  CHECK(counts.at({dataset::ClassLabel::kReal, dataset::Split::kValidation}) == 2);
  CHECK(counts.at({dataset::ClassLabel::kReal, dataset::Split::kTest}) == 1);
  CHECK(m.seed == 4u);

  // Same seed, same manifest.
  CHECK(invoke({"split", "--manifest", (dir / "inventory.jsonl").string(), "--seed", "4", "--out",
             (dir / "again.jsonl").string()})
            .code == 0);
  CHECK(dataset::read_manifest(dir / "again.jsonl") == m);
  CHECK(invoke({"split", "--manifest", (dir / "inventory.jsonl").string(), "--ratios", "7:2"}).code == 1);
}

TEST_CASE("train then eval compose") {
  const auto dir = scratch("pipeline");
  write_inventory(dir, 60, true);
  REQUIRE(invoke({"split", "--manifest", (dir / "inventory.jsonl").string(), "--seed", "1"}).code == 0);
  const auto t = invoke({"train", "--manifest", (dir / "manifest.jsonl").string(), "--variant", "vgg16", "--classes", "2",
                      "--epochs", "5", "--backbone", "stub", "--out", (dir / "run").string()});
  CHECK(t.code == 0);
  CHECK(fs::exists(dir / "run" / "model.fgw"));
  CHECK(fs::exists(dir / "run" / "model.json"));
  CHECK(fs::exists(dir / "run" / "curves.png"));
  const auto history = training::read_history(dir / "run" / "history.csv");
  CHECK(history.records.size() == 5);

  const auto e = invoke({"eval", "--manifest", (dir / "manifest.jsonl").string(), "--checkpoint",
                      (dir / "run" / "model.fgw").string(), "--out", (dir / "run" / "report.json").string()});
  CHECK(e.code == 0);
  CHECK(e.out.find("weighted avg") != std::string::npos);
  const auto report = nlohmann::json::parse(std::ifstream(dir / "run" / "report.json"));
  CHECK(report["total_support"] == 12);
  CHECK(report["accuracy"].get<double>() >= 0.9);

  // Deterministic end to end.
  CHECK(invoke({"train", "--manifest", (dir / "manifest.jsonl").string(), "--variant", "vgg16", "--classes", "2",
                "--epochs", "5", "--backbone", "stub", "--out", (dir / "run2").string()})
            .code == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "run" / "history.csv") == slurp(dir / "run2" / "history.csv"));
  CHECK(slurp(dir / "run" / "model.fgw") == slurp(dir / "run2" / "model.fgw"));

  // A 2-class model cannot train on plastic labels: runtime error, exit 2.
  auto m = dataset::read_manifest(dir / "manifest.jsonl");
  m.entries[0].label = dataset::ClassLabel::kPlastic;
  dataset::write_manifest(m, dir / "plastic.jsonl");
  CHECK(invoke({"train", "--manifest", (dir / "plastic.jsonl").string(), "--variant", "vgg16", "--classes", "2",
             "--backbone", "stub", "--out", (dir / "run3").string()})
            .code == 2);
}

TEST_CASE("eval of a perfect model prints accuracy 1") {
  const auto dir = scratch("perfect");
  write_inventory(dir, 10, false);
  REQUIRE(invoke({"split", "--manifest", (dir / "inventory.jsonl").string()}).code == 0);
  model_zoo::ClassifierOptions opt;
  opt.source = model_zoo::BackboneSource::kStub;
  auto model = model_zoo::build_classifier(model_zoo::BackboneVariant::kVgg16, 2, opt);
  // Nearest-centroid head on the two exact class features.
  const auto fa = model.extract(solid({210, 50, 50}));
  const auto fb = model.extract(solid({50, 50, 210}));
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    model.head.weights[2 * i] = fa[i];
    model.head.weights[2 * i + 1] = fb[i];
    na += double(fa[i]) * fa[i];
    nb += double(fb[i]) * fb[i];
  }
  model.head.bias = {static_cast<float>(-na / 2), static_cast<float>(-nb / 2)};
  model_zoo::save_checkpoint(model, dir / "perfect.fgw");
  const auto e = invoke({"eval", "--manifest", (dir / "manifest.jsonl").string(), "--checkpoint",
                      (dir / "perfect.fgw").string(), "--split", "train"});
  CHECK(e.code == 0);
  std::istringstream lines(e.out);
  std::string line, accuracy;
  while (std::getline(lines, line)) {
    if (line.find("accuracy") != std::string::npos) accuracy = line;
  }
  CAPTURE(e.out);
  CHECK(accuracy.find("1.0000") != std::string::npos);

  // Unreadable image: runtime error naming it.
  const auto m = dataset::read_manifest(dir / "manifest.jsonl");
  const auto victim = dataset::entries_in(m, dataset::Split::kTrain).front().path;
  std::ofstream(dir / victim) << "garbage";
  const auto bad = invoke({"eval", "--manifest", (dir / "manifest.jsonl").string(), "--checkpoint",
                        (dir / "perfect.fgw").string(), "--split", "train"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find(victim) != std::string::npos);
}

TEST_CASE("curves from a nine-epoch history") {
  const auto dir = scratch("curves");
  std::ofstream(dir / "history.csv") << "epoch,train_loss,train_acc,val_loss,val_acc\n"
                                        "1,0.1486,0.9397,0.1252,0.9579\n2,0.0916,0.9622,0.0740,0.9726\n"
                                        "3,0.0810,0.9664,0.0553,0.9802\n4,0.0761,0.9686,0.0852,0.9741\n"
                                        "5,0.0711,0.9702,0.0670,0.9772\n6,0.0693,0.9715,0.0459,0.9852\n"
                                        "7,0.0658,0.9726,0.0962,0.9711\n8,0.0651,0.9724,0.0431,0.9856\n"
                                        "9,0.0621,0.9737,0.0508,0.9834\n";
  const auto r = invoke({"curves", "--history", (dir / "history.csv").string(), "--out", (dir / "curves.png").string()});
  CHECK(r.code == 0);
  CHECK(fs::file_size(dir / "curves.png") > 0);
  std::ofstream(dir / "gap.csv") << "epoch,train_loss,train_acc,val_loss,val_acc\n1,1,1,1,1\n3,1,1,1,1\n";
  CHECK(invoke({"curves", "--history", (dir / "gap.csv").string(), "--out", (dir / "gap.png").string()}).code == 2);
}

TEST_CASE("detect one image") {
  const auto dir = scratch("detect");
  model_zoo::ClassifierOptions opt;
  opt.source = model_zoo::BackboneSource::kStub;
  model_zoo::save_checkpoint(model_zoo::build_classifier(model_zoo::BackboneVariant::kVgg16, 3, opt),
                             dir / "m.fgw");
  codec::write_png(oracle::planted_squares(320, 240, {Box{100, 60, 80, 80}}), dir / "face.png");
  codec::write_png(ImageBuffer::filled(100, 100, 3, 0), dir / "blank.png");
  const auto r = invoke({"detect", "--image", (dir / "face.png").string(), "--model", (dir / "m.fgw").string(), "--out",
                      (dir / "r.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("verdict: ") != std::string::npos);
  CHECK(r.out.find("plastic") != std::string::npos);
  const auto doc = nlohmann::json::parse(std::ifstream(dir / "r.json"));
  CHECK(doc["face_found"] == true);
  const auto blank = invoke({"detect", "--image", (dir / "blank.png").string(), "--model", (dir / "m.fgw").string()});
  CHECK(blank.code == 0);
  CHECK(blank.out.find("No face found in the uploaded image.") != std::string::npos);
  codec::write_png(ImageBuffer::filled(30, 30, 3, 0), dir / "tiny.png");
  CHECK(invoke({"detect", "--image", (dir / "tiny.png").string(), "--model", (dir / "m.fgw").string()}).code == 2);
}
