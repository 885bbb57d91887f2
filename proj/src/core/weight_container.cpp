#include "forgeguard/core/weight_container.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "forgeguard/core/error.hpp"

namespace forgeguard {
namespace {

constexpr char kMagic[4] = {'F', 'G', 'W', 'C'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }

  template <typename T>
  void scalar(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
      auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
      std::reverse(raw.begin(), raw.end());
      bytes(raw.data(), raw.size());
    } else {
      bytes(&value, sizeof(T));
    }
  }

  void string(const std::string& s) {
    scalar(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void floats(const std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(values.data(), values.size() * sizeof(float));
    } else {
      for (float v : values) scalar(v);
    }
  }

  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void need(std::size_t n, const std::string& field) const {
    if (data_.size() - pos_ < n) {
      throw Error(ErrorKind::kLoad, "weight file truncated while reading " + field);
    }
  }

  template <typename T>
  T scalar(const std::string& field) {
    need(sizeof(T), field);
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(raw.begin(), raw.end());
    }
    return std::bit_cast<T>(raw);
  }

  std::string string(const std::string& field) {
    const auto n = scalar<std::uint32_t>(field + " length");
    need(n, field);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::vector<float> floats(std::size_t count, const std::string& field) {
    if (count > (data_.size() - pos_) / sizeof(float)) {
      throw Error(ErrorKind::kLoad, "weight file truncated while reading " + field);
    }
    std::vector<float> values(count);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(values.data(), data_.data() + pos_, count * sizeof(float));
      pos_ += count * sizeof(float);
    } else {
      for (auto& v : values) v = scalar<float>(field);
    }
    return values;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor Tensor::zeros(std::vector<std::uint32_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.values.assign(t.element_count(), 0.0f);
  return t;
}

std::size_t Tensor::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t b) { return a * b; });
}

const LayerRecord* WeightContainer::find(std::string_view name) const {
  for (const auto& layer : layers) {
    if (layer.name == name) return &layer;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_container(const WeightContainer& container) {
  Writer body;
  body.string(container.tag);
  body.scalar(static_cast<std::uint32_t>(container.layers.size()));
  for (const auto& layer : container.layers) {
    body.string(layer.name);
    body.scalar(layer.kind);
    body.scalar(static_cast<std::uint32_t>(layer.attrs.size()));
    for (auto a : layer.attrs) body.scalar(a);
    body.scalar(static_cast<std::uint32_t>(layer.tensors.size()));
    for (const auto& t : layer.tensors) {
      if (t.values.size() != t.element_count()) {
        throw Error(ErrorKind::kInvalidArgument,
                    "tensor in layer '" + layer.name + "' has values inconsistent with its shape");
      }
      body.scalar(static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) body.scalar(d);
      body.floats(t.values);
    }
  }

  Writer out;
  out.bytes(kMagic, sizeof(kMagic));
  out.scalar(kWeightContainerVersion);
  out.scalar(static_cast<std::uint64_t>(body.buffer().size()));
  out.bytes(body.buffer().data(), body.buffer().size());
  return std::move(out.buffer());
}

WeightContainer decode_container(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  in.need(sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::kLoad, "weight file has bad magic (expected FGWC)");
  }
  in.scalar<std::uint32_t>("magic");  // skip the four magic bytes
  const auto version = in.scalar<std::uint32_t>("version");
  if (version != kWeightContainerVersion) {
    throw Error(ErrorKind::kLoad, "weight file version " + std::to_string(version) + " is not supported");
  }
  const auto payload = in.scalar<std::uint64_t>("payload size");
  if (payload != in.remaining()) {
    throw Error(ErrorKind::kLoad, "weight file payload size mismatch: header says " + std::to_string(payload) +
                                      " bytes, file has " + std::to_string(in.remaining()));
  }

  WeightContainer container;
  container.tag = in.string("tag");
  const auto layer_count = in.scalar<std::uint32_t>("layer count");
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::string where = "layer " + std::to_string(i);
    LayerRecord layer;
    layer.name = in.string(where + " name");
    layer.kind = in.scalar<std::uint32_t>(where + " kind");
    const auto attr_count = in.scalar<std::uint32_t>(where + " attr count");
    for (std::uint32_t a = 0; a < attr_count; ++a) {
      layer.attrs.push_back(in.scalar<std::int32_t>(where + " attrs"));
    }
    const auto tensor_count = in.scalar<std::uint32_t>(where + " tensor count");
    for (std::uint32_t t = 0; t < tensor_count; ++t) {
      const std::string twhere = where + " tensor " + std::to_string(t);
      Tensor tensor;
      const auto rank = in.scalar<std::uint32_t>(twhere + " rank");
      if (rank > 8) throw Error(ErrorKind::kLoad, twhere + " has implausible rank " + std::to_string(rank));
      for (std::uint32_t d = 0; d < rank; ++d) tensor.shape.push_back(in.scalar<std::uint32_t>(twhere + " dims"));
      tensor.values = in.floats(tensor.element_count(), twhere + " values");
      layer.tensors.push_back(std::move(tensor));
    }
    container.layers.push_back(std::move(layer));
  }
  return container;
}

void write_container(const WeightContainer& container, const std::filesystem::path& path) {
  const auto bytes = encode_container(container);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

WeightContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kLoad, "cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace forgeguard
