#include "forgeguard/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include "forgeguard/cascade/remote.hpp"
#include "forgeguard/codec/codec.hpp"
#include "forgeguard/core/encoding.hpp"
#include "forgeguard/core/error.hpp"
#include "forgeguard/dataset/manifest.hpp"
#include "forgeguard/dataset/pipeline.hpp"
#include "forgeguard/evaluation/metrics.hpp"
#include "forgeguard/model_zoo/registry.hpp"
#include "forgeguard/service/service.hpp"
#include "forgeguard/training/history.hpp"
#include "forgeguard/training/trainer.hpp"

namespace forgeguard::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kLabels{"real", "fake", "plastic"};
const std::vector<std::string> kVariants{"efficientnet_b4", "resnet50", "vgg16"};

struct DetectorFlags {
  std::string kind = "local";
  std::string stages;
  std::string endpoint;
};

void add_detector_flags(CLI::App& cmd, DetectorFlags& flags) {
  cmd.add_option("--detector", flags.kind, "Face detector: local cascade or remote provider")
      ->check(CLI::IsMember({"local", "remote"}))
      ->capture_default_str();
  cmd.add_option("--stages", flags.stages,
                 "Directory with proposal/refine/output.fgw cascade weights "
                 "(default: <model cache>/cascade, else the marker stand-in)");
  cmd.add_option("--endpoint", flags.endpoint,
                 "Remote detection URL (default: $FORGEGUARD_REMOTE_ENDPOINT; key from $FORGEGUARD_REMOTE_KEY)");
}

std::shared_ptr<const cascade::FaceDetector> make_detector(const DetectorFlags& flags, std::ostream& err) {
  if (flags.kind == "remote") {
    cascade::RemoteServiceConfig config;
    config.endpoint = flags.endpoint;
    if (config.endpoint.empty()) {
      if (const char* env = std::getenv("FORGEGUARD_REMOTE_ENDPOINT")) config.endpoint = env;
    }
    if (const char* key = std::getenv("FORGEGUARD_REMOTE_KEY")) config.api_key = key;
    if (config.endpoint.empty()) {
      throw Error(ErrorKind::kConfiguration, "remote detector needs --endpoint or FORGEGUARD_REMOTE_ENDPOINT");
    }
    return std::make_shared<cascade::RemoteDetector>(config, cascade::make_http_transport());
  }
  fs::path dir = flags.stages;
  if (dir.empty() && fs::exists(model_zoo::default_model_cache() / "cascade" / "proposal.fgw")) {
    dir = model_zoo::default_model_cache() / "cascade";
  }
  if (dir.empty()) {
    err << "warning: no cascade weights configured; using the marker stand-in detector\n";
    return std::make_shared<cascade::CascadeDetector>(cascade::marker_stage_set());
  }
  return std::make_shared<cascade::CascadeDetector>(cascade::load_stage_set(dir));
}

dataset::ClassLabel label_of(const std::string& name) { return *dataset::parse_label(name); }

std::array<int, 3> parse_ratios(const std::string& text) {
  std::array<int, 3> r{};
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d:%d:%d%c", &r[0], &r[1], &r[2], &tail) != 3 || r[0] <= 0 || r[1] <= 0 ||
      r[2] <= 0) {
    throw CLI::ValidationError("--ratios", "expected three positive integers like 7:2:1");
  }
  return r;
}

void print_counts(const dataset::DatasetManifest& m, std::ostream& out) {
  const auto counts = dataset::class_counts(m);
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s\n", "", "train", "validation", "test");
  out << line;
  for (auto label : dataset::kAllLabels) {
    std::size_t row[3]{};
    bool any = false;
    for (int s = 0; s < 3; ++s) {
      const auto it = counts.find({label, dataset::kAllSplits[s]});
      if (it != counts.end()) row[s] = it->second, any = true;
    }
    if (!any) continue;
    std::snprintf(line, sizeof line, "%-10s %10zu %10zu %10zu\n", std::string(dataset::to_string(label)).c_str(),
                  row[0], row[1], row[2]);
    out << line;
  }
}

fs::path manifest_root(const std::string& manifest, const std::string& root) {
  if (!root.empty()) return root;
  const auto parent = fs::path(manifest).parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

std::optional<fs::path> optional_path(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional<fs::path>(s);
}

void print_probabilities(const service::DetectResponse& r, std::ostream& out) {
  if (!r.face_found) {
    out << *r.message << "\n";
    return;
  }
  out << "verdict: " << *r.verdict << "\n";
  char line[128];
  for (const auto& [name, p] : r.probabilities) {
    std::snprintf(line, sizeof line, "  %-10s %.4f\n", name.c_str(), p);
    out << line;
  }
  if (r.detections.size() > 1) out << "faces detected: " << r.detections.size() << " (classified the most confident)\n";
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"forgeguard: face forgery detection toolkit", "forgeguard"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // prep
  auto* prep = app.add_subcommand("prep", "Extract frames, detect and crop faces into a labelled inventory");
  std::string prep_videos, prep_images, prep_label, prep_out;
  dataset::FrameExtractionConfig frames;
  int max_frames = -1;
  DetectorFlags prep_det;
  prep->add_option("--videos", prep_videos, "Directory of videos")->check(CLI::ExistingDirectory);
  prep->add_option("--images", prep_images, "Directory of images")->check(CLI::ExistingDirectory);
  prep->add_option("--label", prep_label, "Class of every input")->required()->check(CLI::IsMember(kLabels));
  prep->add_option("--out", prep_out, "Dataset directory (crops + inventory.jsonl)")->required();
  prep->add_option("--every-nth", frames.every_nth, "Keep every n-th video frame")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  prep->add_option("--max-frames", max_frames, "Frames kept per video (default: all)")->check(CLI::NonNegativeNumber);
  add_detector_flags(*prep, prep_det);

  // split
  auto* split = app.add_subcommand("split", "Stratified train/validation/test split of an inventory");
  std::string split_manifest, split_out, split_ratios = "7:2:1";
  std::uint64_t split_seed = 0;
  split->add_option("--manifest", split_manifest, "Inventory (JSON lines) to split")
      ->required()
      ->check(CLI::ExistingFile);
  split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
  split->add_option("--ratios", split_ratios, "train:validation:test")->capture_default_str();
  split->add_option("--out", split_out, "Split manifest (default: manifest.jsonl next to the inventory)");

  // train
  auto* train = app.add_subcommand("train", "Train a classifier head on a split manifest");
  std::string train_manifest, train_root, train_variant = "efficientnet_b4", train_backbone = "registry",
                                          train_registry, train_out;
  int train_classes = 3, train_epochs = 0;
  training::TrainConfig tc;
  train->add_option("--manifest", train_manifest, "Split manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--root", train_root, "Image root (default: the manifest's directory)");
  train->add_option("--variant", train_variant, "Backbone")->check(CLI::IsMember(kVariants))->capture_default_str();
  train->add_option("--classes", train_classes, "Number of classes")->check(CLI::Range(2, 3))->capture_default_str();
  train->add_option("--epochs", train_epochs, "Epoch budget (default: 15 for efficientnet_b4, else 100)")
      ->check(CLI::PositiveNumber);
  train->add_option("--batch-size", tc.batch_size, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--lr", tc.adam.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--patience", tc.early_stop.patience, "Early-stopping patience")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--min-delta", tc.early_stop.min_delta, "Early-stopping minimum improvement")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train->add_option("--seed", tc.seed, "Seed for head init, shuffling and dropout")->capture_default_str();
  train->add_option("--backbone", train_backbone, "Backbone weights: registry or offline stub")
      ->check(CLI::IsMember({"registry", "stub"}))
      ->capture_default_str();
  train->add_option("--registry", train_registry, "Model registry directory (default: $FORGEGUARD_MODEL_CACHE)");
  train->add_option("--out", train_out, "Output directory (model.fgw, model.json, history.csv, curves.png)")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split and print the report");
  std::string eval_manifest, eval_checkpoint, eval_split = "test", eval_root, eval_registry, eval_out;
  eval->add_option("--manifest", eval_manifest, "Split manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", eval_checkpoint, "Model checkpoint (.fgw)")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", eval_split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "validation", "test"}))
      ->capture_default_str();
  eval->add_option("--root", eval_root, "Image root (default: the manifest's directory)");
  eval->add_option("--registry", eval_registry, "Model registry directory");
  eval->add_option("--out", eval_out, "Report JSON path");

  // curves
  auto* curves = app.add_subcommand("curves", "Plot loss and accuracy curves from a history CSV");
  std::string curves_history, curves_out;
  curves->add_option("--history", curves_history, "History CSV")->required()->check(CLI::ExistingFile);
  curves->add_option("--out", curves_out, "PNG path")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP inference service");
  std::string serve_model, serve_host = "127.0.0.1", serve_static, serve_log, serve_registry;
  int serve_port = 8080;
  DetectorFlags serve_det;
  serve->add_option("--model", serve_model, "Model checkpoint (.fgw); the service reports not-ready without one")
      ->check(CLI::ExistingFile);
  serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_port, "Port (0 = any free port)")->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--static", serve_static, "Webapp bundle served at /")->check(CLI::ExistingDirectory);
  serve->add_option("--log", serve_log, "Detection log (JSON lines)");
  serve->add_option("--registry", serve_registry, "Model registry directory");
  add_detector_flags(*serve, serve_det);

  // detect
  auto* detect = app.add_subcommand("detect", "Classify the most prominent face in one image");
  std::string detect_image, detect_model, detect_registry, detect_out;
  DetectorFlags detect_det;
  detect->add_option("--image", detect_image, "Image file")->required()->check(CLI::ExistingFile);
  detect->add_option("--model", detect_model, "Model checkpoint (.fgw)")->required()->check(CLI::ExistingFile);
  detect->add_option("--registry", detect_registry, "Model registry directory");
  detect->add_option("--out", detect_out, "Response JSON path");
  add_detector_flags(*detect, detect_det);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*prep) {
      if (prep_videos.empty() && prep_images.empty()) {
        err << "error: prep needs --videos and/or --images\n";
        return kExitUsage;
      }
      dataset::PrepConfig config;
      config.videos_dir = optional_path(prep_videos);
      config.images_dir = optional_path(prep_images);
      config.label = label_of(prep_label);
      config.out_dir = prep_out;
      config.frames = frames;
      if (max_frames >= 0) config.frames.max_frames = max_frames;
      const auto detector = make_detector(prep_det, err);
      const auto s = dataset::prepare_dataset(config, *detector);
      out << "videos: " << s.videos << "\nimages: " << s.images << "\nframes: " << s.frames << "\ncrops: " << s.crops
          << "\ninputs without faces: " << s.inputs_without_faces << "\nwarnings: " << s.warnings.size() << "\n";
      for (const auto& w : s.warnings) err << "warning: " << w << "\n";
      return kExitOk;
    }
    if (*split) {
      const auto ratios = parse_ratios(split_ratios);
      const auto inventory = dataset::read_manifest(split_manifest, dataset::ManifestKind::kInventory);
      std::vector<dataset::LabeledItem> items;
      for (const auto& e : inventory.entries) items.push_back({e.path, e.label, e.source, e.face_index});
      const auto manifest = dataset::stratified_split(items, ratios, split_seed);
      const fs::path target =
          split_out.empty() ? fs::path(split_manifest).parent_path() / "manifest.jsonl" : fs::path(split_out);
      dataset::write_manifest(manifest, target);
      print_counts(manifest, out);
      out << "wrote " << target.string() << "\n";
      return kExitOk;
    }
    if (*train) {
      const auto variant = *model_zoo::parse_variant(train_variant);
      tc.epochs = train_epochs > 0 ? train_epochs : training::default_epochs(variant);
      model_zoo::ClassifierOptions opt;
      opt.source = train_backbone == "stub" ? model_zoo::BackboneSource::kStub : model_zoo::BackboneSource::kRegistry;
      opt.registry_dir = optional_path(train_registry);
      opt.seed = tc.seed;
      const auto manifest = dataset::read_manifest(train_manifest);
      auto model = model_zoo::build_classifier(variant, train_classes, opt);
      const fs::path dir = train_out;
      fs::create_directories(dir);
      const auto result =
          training::train(model, manifest, manifest_root(train_manifest, train_root), tc, dir / "model.fgw");
      char line[160];
      out << "epoch  train_loss  train_acc  val_loss  val_acc\n";
      for (const auto& r : result.history.records) {
        std::snprintf(line, sizeof line, "%5d  %10.4f  %9.4f  %8.4f  %7.4f\n", r.epoch, r.train_loss, r.train_acc,
                      r.val_loss, r.val_acc);
        out << line;
      }
      training::write_history(result.history, dir / "history.csv");
      training::emit_curves(result.history, dir / "curves.png");
      out << "best epoch: " << result.history.best_epoch << (result.history.stopped_early ? " (stopped early)" : "")
          << "\nwrote " << (dir / "model.fgw").string() << ", history.csv, curves.png\n";
      return kExitOk;
    }
    if (*eval) {
      const auto model = model_zoo::load_checkpoint(eval_checkpoint, optional_path(eval_registry));
      const auto manifest = dataset::read_manifest(eval_manifest);
      const auto which = *dataset::parse_split(eval_split);
      if (dataset::entries_in(manifest, which).empty()) {
        throw Error(ErrorKind::kConfiguration, "the " + eval_split + " split is empty");
      }
      const auto ev = training::evaluate_split(model, manifest, manifest_root(eval_manifest, eval_root), which);
      std::vector<std::pair<int, int>> pairs;
      for (const auto& p : ev.predictions) pairs.emplace_back(p.true_label, p.predicted_label);
      const auto matrix = evaluation::confusion(pairs, model.class_names);
      const auto report = evaluation::report(matrix);
      out << evaluation::format_report(report);
      char line[64];
      std::snprintf(line, sizeof line, "\nloss: %.4f\n", ev.loss);
      out << line << "confusion (rows true, columns predicted):\n";
      for (std::size_t i = 0; i < matrix.size(); ++i) {
        std::snprintf(line, sizeof line, "%-10s", matrix.class_names[i].c_str());
        out << line;
        for (auto v : matrix.counts[i]) out << " " << v;
        out << "\n";
      }
      if (!eval_out.empty()) {
        const fs::path path = eval_out;
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream(path) << evaluation::report_json(report) << "\n";
        out << "wrote " << path.string() << "\n";
      }
      return kExitOk;
    }
    if (*curves) {
      training::emit_curves(training::read_history(curves_history), curves_out);
      out << "wrote " << curves_out << "\n";
      return kExitOk;
    }
    if (*serve) {
      service::InferenceService svc(make_detector(serve_det, err));
      if (!serve_model.empty()) svc.load_checkpoint(serve_model, optional_path(serve_registry));
      if (!serve_log.empty()) svc.set_log(serve_log);
      service::HttpServer server(svc, {serve_host, serve_port, optional_path(serve_static)});
      const int port = server.bind();
      out << "listening on http://" << serve_host << ":" << port << std::endl;
      server.listen();
      return kExitOk;
    }
    if (*detect) {
      const auto model = model_zoo::load_checkpoint(detect_model, optional_path(detect_registry));
      const auto detector = make_detector(detect_det, err);
      const auto bytes = read_file_bytes(detect_image);
      const auto ext = fs::path(detect_image).extension().string();
      const auto response =
          service::handle_detect({bytes, ext.empty() ? std::string() : ext.substr(1)}, model, *detector);
      print_probabilities(response, out);
      if (!detect_out.empty()) std::ofstream(detect_out) << service::to_json(response) << "\n";
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace forgeguard::cli
