#include "forgeguard/dataset/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "forgeguard/codec/codec.hpp"
#include "forgeguard/core/error.hpp"
#include "forgeguard/imaging/geometry.hpp"
#include "forgeguard/imaging/transform.hpp"

namespace forgeguard::dataset {

using imaging::ImageBuffer;

std::vector<ImageBuffer> extract_frames(const std::filesystem::path& video, const FrameExtractionConfig& config) {
  if (config.every_nth < 1) throw Error(ErrorKind::kInvalidArgument, "every_nth must be >= 1");
  if (config.max_frames && *config.max_frames < 0) throw Error(ErrorKind::kInvalidArgument, "max_frames must be >= 0");
  codec::VideoReader reader(video);
  std::vector<ImageBuffer> frames;
  for (long index = 0;; ++index) {
    if (config.max_frames && static_cast<int>(frames.size()) >= *config.max_frames) break;
    if (index % config.every_nth == 0) {
      auto frame = reader.next();
      if (!frame) break;
      frames.push_back(std::move(*frame));
    } else if (!reader.skip()) {
      break;
    }
  }
  return frames;
}

ImageBuffer preprocess_frame(const ImageBuffer& image) {
  const double scale = imaging::resize_rule(image.width());
  const int w = std::max(1, static_cast<int>(std::lround(image.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height() * scale)));
  return imaging::resample(image, w, h);
}

std::vector<HarvestedFace> harvest_faces(const ImageBuffer& image, const cascade::FaceDetector& detector) {
  std::vector<HarvestedFace> faces;
  for (const auto& det : detector.detect(image)) {
    if (!(det.confidence >= kHarvestConfidence)) continue;
    const auto region = imaging::expand_margin(det.box, kHarvestMargin, image.width(), image.height());
    try {
      faces.push_back({imaging::crop(image, region), region, det, std::nullopt});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerateCrop) throw;
    }
  }
  if (faces.size() > 1) {
    for (std::size_t i = 0; i < faces.size(); ++i) faces[i].face_index = static_cast<int>(i);
  }
  return faces;
}

namespace {

// Uniform integer in [0, bound) by rejection; unlike the standard
// distributions its output is specified, so splits are portable.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace

std::array<std::size_t, 3> apportion(std::size_t n, std::array<int, 3> ratios) {
  std::uint64_t total = 0;
  for (int r : ratios) {
    if (r <= 0) throw Error(ErrorKind::kInvalidArgument, "split ratios must be positive");
    total += static_cast<std::uint64_t>(r);
  }
  std::array<std::size_t, 3> quota{};
  std::array<std::uint64_t, 3> remainder{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const std::uint64_t scaled = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(ratios[s]);
    quota[s] = static_cast<std::size_t>(scaled / total);
    remainder[s] = scaled % total;
    assigned += quota[s];
  }
  // Hand out the leftovers by largest remainder; stable order breaks ties
  // toward train, then validation.
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++quota[order[i]];
  return quota;
}

DatasetManifest stratified_split(const std::vector<LabeledItem>& items, std::array<int, 3> ratios, std::uint64_t seed) {
  std::set<std::string> paths;
  for (const auto& item : items) {
    if (!paths.insert(item.path).second) {
      throw Error(ErrorKind::kManifest, "duplicate path '" + item.path + "' in split input");
    }
  }
  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.entries.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    manifest.entries[i] = {items[i].path, items[i].label, std::nullopt, items[i].source, items[i].face_index};
  }
  for (std::size_t li = 0; li < kAllLabels.size(); ++li) {
    const ClassLabel label = kAllLabels[li];
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].label == label) members.push_back(i);
    }
    if (members.empty()) continue;
    // Each class gets its own stream so adding a class leaves the others alone.
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (li + 1)));
    for (std::size_t i = members.size() - 1; i > 0; --i) {
      std::swap(members[i], members[bounded(rng, i + 1)]);
    }
    const auto quota = apportion(members.size(), ratios);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < quota[s]; ++k) manifest.entries[members[pos++]].split = kAllSplits[s];
    }
  }
  return manifest;
}

namespace {

std::string flat_name(const std::filesystem::path& file) {
  std::string name = file.filename().string();
  std::replace(name.begin(), name.end(), '.', '_');
  return name;
}

}  // namespace

PrepSummary prepare_dataset(const PrepConfig& config, const cascade::FaceDetector& detector) {
  namespace fs = std::filesystem;
  if (!config.videos_dir && !config.images_dir) {
    throw Error(ErrorKind::kInvalidArgument, "prep needs a videos or images directory");
  }
  for (const auto* dir : {&config.videos_dir, &config.images_dir}) {
    if (*dir && !fs::is_directory(**dir)) throw Error(ErrorKind::kIo, "not a directory: " + (*dir)->string());
  }
  if (config.out_dir.empty()) throw Error(ErrorKind::kInvalidArgument, "prep needs an output directory");

  const std::string label_dir(to_string(config.label));
  fs::create_directories(config.out_dir / label_dir);
  const fs::path inventory_path = config.out_dir / kInventoryName;
  DatasetManifest inventory;
  if (fs::exists(inventory_path)) inventory = read_manifest(inventory_path, ManifestKind::kInventory);
  std::set<std::string> known;
  for (const auto& e : inventory.entries) known.insert(e.path);

  PrepSummary summary;
  auto sorted_files = [](const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
  };

  auto harvest = [&](const ImageBuffer& raw, const std::string& stem, const std::string& source) {
    const auto faces = harvest_faces(preprocess_frame(raw), detector);
    if (faces.empty()) ++summary.inputs_without_faces;
    for (const auto& face : faces) {
      std::string name = stem;
      if (face.face_index) name += "_" + std::to_string(*face.face_index);
      const std::string rel = label_dir + "/" + name + ".png";
      codec::write_png(face.crop, config.out_dir / rel);
      ++summary.crops;
      if (known.insert(rel).second) {
        inventory.entries.push_back({rel, config.label, std::nullopt, source, face.face_index});
      }
    }
  };

  if (config.videos_dir) {
    for (const auto& file : sorted_files(*config.videos_dir)) {
      if (!codec::is_video_path(file)) continue;
      ++summary.videos;
      std::vector<ImageBuffer> frames;
      try {
        frames = extract_frames(file, config.frames);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kCodec) throw;
        summary.warnings.push_back(e.what());
        continue;
      }
      for (std::size_t k = 0; k < frames.size(); ++k) {
        ++summary.frames;
        const long frame_no = static_cast<long>(k) * config.frames.every_nth;
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_f%06ld", frame_no);
        harvest(frames[k], flat_name(file) + suffix, file.filename().string() + "#frame=" + std::to_string(frame_no));
      }
    }
  }
  if (config.images_dir) {
    for (const auto& file : sorted_files(*config.images_dir)) {
      if (!codec::is_image_path(file)) continue;
      ++summary.images;
      ImageBuffer image(1, 1, 3);
      try {
        image = codec::read_image(file);
      } catch (const Error& e) {
        summary.warnings.push_back(e.what());
        continue;
      }
      harvest(image, flat_name(file), file.filename().string());
    }
  }
  if (summary.crops == 0) summary.warnings.push_back("no faces were harvested");
  write_manifest(inventory, inventory_path);
  return summary;
}

}  // namespace forgeguard::dataset
