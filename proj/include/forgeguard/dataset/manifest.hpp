#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forgeguard::dataset {

enum class ClassLabel { kReal, kFake, kPlastic };
enum class Split { kTrain, kValidation, kTest };

inline constexpr std::array<ClassLabel, 3> kAllLabels{ClassLabel::kReal, ClassLabel::kFake, ClassLabel::kPlastic};
inline constexpr std::array<Split, 3> kAllSplits{Split::kTrain, Split::kValidation, Split::kTest};

std::string_view to_string(ClassLabel label);
std::string_view to_string(Split split);
std::optional<ClassLabel> parse_label(std::string_view name);
std::optional<Split> parse_split(std::string_view name);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  ClassLabel label = ClassLabel::kReal;
  // Absent only in a pre-split inventory (what prep produces).
  std::optional<Split> split;
  std::optional<std::string> source;
  std::optional<int> face_index;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

using ClassCounts = std::map<std::pair<ClassLabel, Split>, std::size_t>;

// Counts per (label, split); entries without a split are not counted.
ClassCounts class_counts(const DatasetManifest& manifest);

// Entries of one split in manifest order.
std::vector<ManifestEntry> entries_in(const DatasetManifest& manifest, Split split);

// JSON lines. An optional first line {"seed": N} records the split seed;
// every other line is {"path", "label", "split", "source"?, "face_index"?}.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

enum class ManifestKind {
  kSplit,      // every entry must carry a split
  kInventory,  // split optional
};

// Throws Error(kParse) naming the line and field for malformed JSON, missing
// or mistyped fields, labels outside {real, fake, plastic}, and duplicate
// paths.
DatasetManifest read_manifest(const std::filesystem::path& path, ManifestKind kind = ManifestKind::kSplit);
DatasetManifest parse_manifest(std::string_view text, ManifestKind kind = ManifestKind::kSplit,
                               std::string_view origin = "manifest");

// Paths whose files are missing under root.
std::vector<std::string> missing_files(const DatasetManifest& manifest, const std::filesystem::path& root);

}  // namespace forgeguard::dataset
