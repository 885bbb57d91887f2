#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "forgeguard/core/weight_container.hpp"

namespace forgeguard::model_zoo {

// $FORGEGUARD_MODEL_CACHE, else $HOME/.cache/forgeguard/models.
std::filesystem::path default_model_cache();

struct RegistryEntry {
  std::string name;
  std::string file;  // relative to the registry directory
  std::string sha256;
};

// Backbone weight files plus registry.json recording their checksums. No
// network access: weights get in via add() (see tools/export_keras_backbone.py).
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::vector<RegistryEntry> entries() const;
  std::optional<RegistryEntry> find(const std::string& name) const;

  // Writes <name>.fgw and records its checksum.
  RegistryEntry add(const std::string& name, const WeightContainer& weights);
  // Registers an existing file (copied into the registry directory).
  RegistryEntry add_file(const std::string& name, const std::filesystem::path& file);

  // Throws Error(kRegistry) when the entry or file is missing or the
  // checksum does not match.
  WeightContainer load(const std::string& name) const;

 private:
  void save(const std::vector<RegistryEntry>& entries) const;
  std::filesystem::path dir_;
};

}  // namespace forgeguard::model_zoo
