#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "forgeguard/cascade/detector.hpp"
#include "forgeguard/dataset/manifest.hpp"
#include "forgeguard/imaging/image.hpp"

namespace forgeguard::dataset {

struct FrameExtractionConfig {
  int every_nth = 10;
  std::optional<int> max_frames;
};

// Frames 0, n, 2n, ... in temporal order, at most max_frames of them.
std::vector<imaging::ImageBuffer> extract_frames(const std::filesystem::path& video, const FrameExtractionConfig& config);

// Both sides scaled by resize_rule(width), bilinear.
imaging::ImageBuffer preprocess_frame(const imaging::ImageBuffer& image);

inline constexpr double kHarvestConfidence = 0.95;
inline constexpr double kHarvestMargin = 0.30;

struct HarvestedFace {
  imaging::ImageBuffer crop;
  imaging::Box region;  // margin-expanded, clipped box that was cropped
  cascade::FaceDetection detection;
  std::optional<int> face_index;  // set only when more than one face survived
};

// Detections with confidence >= 0.95, each grown by a 30% margin, clipped and
// cropped, in detection order.
std::vector<HarvestedFace> harvest_faces(const imaging::ImageBuffer& image, const cascade::FaceDetector& detector);

struct LabeledItem {
  std::string path;
  ClassLabel label = ClassLabel::kReal;
  std::optional<std::string> source;
  std::optional<int> face_index;
};

// Per class: seeded Fisher-Yates shuffle, then largest-remainder
// apportionment of the class count over ratios (ties: train, validation,
// test). Entries keep input order; only their split differs.
DatasetManifest stratified_split(const std::vector<LabeledItem>& items, std::array<int, 3> ratios,
                                 std::uint64_t seed);

// Largest-remainder quotas for n items.
std::array<std::size_t, 3> apportion(std::size_t n, std::array<int, 3> ratios);

struct PrepConfig {
  std::optional<std::filesystem::path> videos_dir;
  std::optional<std::filesystem::path> images_dir;
  ClassLabel label = ClassLabel::kReal;
  std::filesystem::path out_dir;
  FrameExtractionConfig frames;
};

struct PrepSummary {
  std::size_t videos = 0;
  std::size_t images = 0;
  std::size_t frames = 0;
  std::size_t crops = 0;
  std::size_t inputs_without_faces = 0;
  std::vector<std::string> warnings;
};

// Frame extraction + resize tiers + harvesting over every video and image in
// the input directories (sorted by name). Crops go to
// <out_dir>/<label>/<stem>[_fNNNNNN][_K].png; their entries are appended to
// the inventory <out_dir>/inventory.jsonl.
PrepSummary prepare_dataset(const PrepConfig& config, const cascade::FaceDetector& detector);

inline constexpr const char* kInventoryName = "inventory.jsonl";

}  // namespace forgeguard::dataset
