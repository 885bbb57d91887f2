#include "forgeguard/model_zoo/registry.hpp"

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "forgeguard/core/encoding.hpp"
#include "forgeguard/core/error.hpp"

namespace forgeguard::model_zoo {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path default_model_cache() {
  if (const char* env = std::getenv("FORGEGUARD_MODEL_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "forgeguard" / "models";
  return fs::temp_directory_path() / "forgeguard-models";
}

ModelRegistry::ModelRegistry(fs::path dir) : dir_(std::move(dir)) {}

std::vector<RegistryEntry> ModelRegistry::entries() const {
  const auto index = dir_ / "registry.json";
  if (!fs::exists(index)) return {};
  std::ifstream in(index);
  json doc;
  try {
    doc = json::parse(in);
    std::vector<RegistryEntry> out;
    for (const auto& [name, e] : doc.at("models").items()) {
      out.push_back({name, e.at("file").get<std::string>(), e.at("sha256").get<std::string>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kRegistry, "malformed " + index.string() + ": " + e.what());
  }
}

std::optional<RegistryEntry> ModelRegistry::find(const std::string& name) const {
  for (auto& e : entries()) {
    if (e.name == name) return e;
  }
  return std::nullopt;
}

void ModelRegistry::save(const std::vector<RegistryEntry>& entries) const {
  json models = json::object();
  for (const auto& e : entries) models[e.name] = {{"file", e.file}, {"sha256", e.sha256}};
  std::ofstream out(dir_ / "registry.json", std::ios::trunc);
  out << json{{"models", models}}.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + (dir_ / "registry.json").string());
}

RegistryEntry ModelRegistry::add(const std::string& name, const WeightContainer& weights) {
  fs::create_directories(dir_);
  const std::string file = name + ".fgw";
  write_container(weights, dir_ / file);
  RegistryEntry entry{name, file, sha256_file(dir_ / file)};
  auto all = entries();
  std::erase_if(all, [&](const RegistryEntry& e) { return e.name == name; });
  all.push_back(entry);
  save(all);
  return entry;
}

RegistryEntry ModelRegistry::add_file(const std::string& name, const fs::path& file) {
  fs::create_directories(dir_);
  const std::string target = name + ".fgw";
  if (fs::absolute(file) != fs::absolute(dir_ / target)) {
    fs::copy_file(file, dir_ / target, fs::copy_options::overwrite_existing);
  }
  RegistryEntry entry{name, target, sha256_file(dir_ / target)};
  auto all = entries();
  std::erase_if(all, [&](const RegistryEntry& e) { return e.name == name; });
  all.push_back(entry);
  save(all);
  return entry;
}

WeightContainer ModelRegistry::load(const std::string& name) const {
  const auto entry = find(name);
  if (!entry) {
    throw Error(ErrorKind::kRegistry, "no weights for '" + name + "' in model registry " + dir_.string() +
                                          " (set FORGEGUARD_MODEL_CACHE or register them with "
                                          "tools/export_keras_backbone.py)");
  }
  const auto path = dir_ / entry->file;
  if (!fs::exists(path)) throw Error(ErrorKind::kRegistry, "registered weights file is missing: " + path.string());
  const auto bytes = read_file_bytes(path);
  if (sha256_hex(bytes) != entry->sha256) {
    throw Error(ErrorKind::kRegistry, "checksum mismatch for " + path.string());
  }
  try {
    return decode_container(bytes);
  } catch (const Error& e) {
    throw Error(ErrorKind::kRegistry, path.string() + ": " + e.what());
  }
}

}  // namespace forgeguard::model_zoo
