#include "forgeguard/dataset/manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "forgeguard/core/error.hpp"

namespace forgeguard::dataset {

using nlohmann::json;

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::kReal: return "real";
    case ClassLabel::kFake: return "fake";
    case ClassLabel::kPlastic: return "plastic";
  }
  return "unknown";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::optional<ClassLabel> parse_label(std::string_view name) {
  for (auto l : kAllLabels) {
    if (to_string(l) == name) return l;
  }
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view name) {
  for (auto s : kAllSplits) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

ClassCounts class_counts(const DatasetManifest& manifest) {
  ClassCounts counts;
  for (const auto& e : manifest.entries) {
    if (e.split) ++counts[{e.label, *e.split}];
  }
  return counts;
}

std::vector<ManifestEntry> entries_in(const DatasetManifest& manifest, Split split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : manifest.entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write manifest " + path.string());
  if (manifest.seed) out << json{{"seed", *manifest.seed}}.dump() << '\n';
  for (const auto& e : manifest.entries) {
    json line;
    line["path"] = e.path;
    line["label"] = std::string(to_string(e.label));
    if (e.split) line["split"] = std::string(to_string(*e.split));
    if (e.source) line["source"] = *e.source;
    if (e.face_index) line["face_index"] = *e.face_index;
    out << line.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing manifest " + path.string());
}

DatasetManifest parse_manifest(std::string_view text, ManifestKind kind, std::string_view origin) {
  DatasetManifest manifest;
  std::unordered_map<std::string, std::size_t> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& field, const std::string& what) {
    throw Error(ErrorKind::kParse, std::string(origin) + ":" + std::to_string(line_no) + ": field '" + field +
                                       "': " + what);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.find_first_not_of(" \t") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(raw);
    } catch (const json::exception&) {
      throw Error(ErrorKind::kParse, std::string(origin) + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    if (!doc.is_object()) fail("<line>", "expected a JSON object");

    if (!doc.contains("path")) {
      if (line_no == 1 && doc.size() == 1 && doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) fail("seed", "expected a non-negative integer");
        manifest.seed = doc["seed"].get<std::uint64_t>();
        continue;
      }
      fail("path", "missing");
    }
    for (const auto& [key, _] : doc.items()) {
      if (key != "path" && key != "label" && key != "split" && key != "source" && key != "face_index") {
        fail(key, "unknown field");
      }
    }

    ManifestEntry e;
    if (!doc["path"].is_string() || doc["path"].get<std::string>().empty()) fail("path", "expected a non-empty string");
    e.path = doc["path"].get<std::string>();

    if (!doc.contains("label")) fail("label", "missing");
    if (!doc["label"].is_string()) fail("label", "expected a string");
    const auto label = parse_label(doc["label"].get<std::string>());
    if (!label) fail("label", "unknown label '" + doc["label"].get<std::string>() + "' (expected real, fake or plastic)");
    e.label = *label;

    if (doc.contains("split")) {
      if (!doc["split"].is_string()) fail("split", "expected a string");
      const auto split = parse_split(doc["split"].get<std::string>());
      if (!split) fail("split", "unknown split '" + doc["split"].get<std::string>() + "'");
      e.split = *split;
    } else if (kind == ManifestKind::kSplit) {
      fail("split", "missing");
    }

    if (doc.contains("source")) {
      if (!doc["source"].is_string()) fail("source", "expected a string");
      e.source = doc["source"].get<std::string>();
    }
    if (doc.contains("face_index")) {
      if (!doc["face_index"].is_number_integer() || doc["face_index"].get<long long>() < 0) {
        fail("face_index", "expected a non-negative integer");
      }
      e.face_index = doc["face_index"].get<int>();
    }

    const auto [it, inserted] = seen.emplace(e.path, line_no);
    if (!inserted) fail("path", "duplicate path '" + e.path + "' (first seen on line " + std::to_string(it->second) + ")");
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path, ManifestKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), kind, path.string());
}

std::vector<std::string> missing_files(const DatasetManifest& manifest, const std::filesystem::path& root) {
  std::vector<std::string> missing;
  for (const auto& e : manifest.entries) {
    if (!std::filesystem::exists(root / e.path)) missing.push_back(e.path);
  }
  return missing;
}

}  // namespace forgeguard::dataset
