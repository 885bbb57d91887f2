#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace forgeguard {

// A dense float32 tensor with an explicit shape. Values are row-major.
struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> values;

  static Tensor zeros(std::vector<std::uint32_t> shape);
  std::size_t element_count() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// One layer's parameters: a kind tag, integer attributes and zero or more
// tensors. Interpretation of kind/attrs belongs to whoever owns the file.
struct LayerRecord {
  std::string name;
  std::uint32_t kind = 0;
  std::vector<std::int32_t> attrs;
  std::vector<Tensor> tensors;

  friend bool operator==(const LayerRecord&, const LayerRecord&) = default;
};

// Versioned binary container shared by cascade stage weights, backbone
// weights and classifier checkpoints.
//
// Layout (all integers and floats little-endian):
//   char[4]  magic "FGWC"
//   u32      version (1)
//   u64      payload byte count (everything after this field)
//   str      tag                (u32 length + UTF-8 bytes)
//   u32      layer count
//   per layer:
//     str    name
//     u32    kind
//     u32    attr count, i32[attr count]
//     u32    tensor count
//     per tensor: u32 rank, u32[rank] dims, f32[prod(dims)] values
struct WeightContainer {
  std::string tag;
  std::vector<LayerRecord> layers;

  const LayerRecord* find(std::string_view name) const;

  friend bool operator==(const WeightContainer&, const WeightContainer&) = default;
};

inline constexpr std::uint32_t kWeightContainerVersion = 1;

std::vector<std::uint8_t> encode_container(const WeightContainer& container);
WeightContainer decode_container(std::span<const std::uint8_t> bytes);

void write_container(const WeightContainer& container, const std::filesystem::path& path);
WeightContainer read_container(const std::filesystem::path& path);

}  // namespace forgeguard
