#include <array>
#include <string>

#include "forgeguard/codec/codec.hpp"
#include "forgeguard/core/error.hpp"

namespace forgeguard::codec {
namespace {

class ByteCursor {
 public:
  explicit ByteCursor(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() {
    if (pos_ >= data_.size()) throw Error(ErrorKind::kCodec, "GIF stream ends unexpectedly");
    return data_[pos_++];
  }
  std::uint16_t u16() {
    const std::uint16_t lo = u8();
    return static_cast<std::uint16_t>(lo | (u8() << 8));
  }
  void skip(std::size_t n) {
    if (data_.size() - pos_ < n) throw Error(ErrorKind::kCodec, "GIF stream ends unexpectedly");
    pos_ += n;
  }
  // Concatenates a chain of length-prefixed sub-blocks.
  std::vector<std::uint8_t> sub_blocks() {
    std::vector<std::uint8_t> out;
    while (true) {
      const std::uint8_t n = u8();
      if (n == 0) break;
      if (data_.size() - pos_ < n) throw Error(ErrorKind::kCodec, "GIF sub-block overruns the stream");
      out.insert(out.end(), data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                 data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
      pos_ += n;
    }
    return out;
  }
  void skip_sub_blocks() {
    while (true) {
      const std::uint8_t n = u8();
      if (n == 0) break;
      skip(n);
    }
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

using Palette = std::vector<std::array<std::uint8_t, 3>>;

Palette read_palette(ByteCursor& in, int size) {
  Palette p(static_cast<std::size_t>(size));
  for (auto& rgb : p) {
    rgb[0] = in.u8();
    rgb[1] = in.u8();
    rgb[2] = in.u8();
  }
  return p;
}

std::vector<std::uint8_t> lzw_decode(const std::vector<std::uint8_t>& data, int min_code_size,
                                     std::size_t pixel_count) {
  if (min_code_size < 2 || min_code_size > 11) throw Error(ErrorKind::kCodec, "GIF LZW code size out of range");
  const int clear = 1 << min_code_size;
  const int eoi = clear + 1;
  constexpr int kMaxCodes = 4096;
  std::array<std::uint16_t, kMaxCodes> prefix{};
  std::array<std::uint8_t, kMaxCodes> suffix{};
  std::array<std::uint8_t, kMaxCodes> first{};
  std::array<std::uint16_t, kMaxCodes> length{};
  for (int i = 0; i < clear; ++i) {
    suffix[i] = static_cast<std::uint8_t>(i);
    first[i] = static_cast<std::uint8_t>(i);
    length[i] = 1;
  }

  std::vector<std::uint8_t> out;
  out.reserve(pixel_count);
  int code_size = min_code_size + 1;
  int next_code = eoi + 1;
  int prev = -1;
  std::uint32_t bits = 0;
  int bit_count = 0;
  std::size_t pos = 0;
  std::vector<std::uint8_t> scratch;

  auto emit = [&](int code) {
    scratch.resize(length[code]);
    for (int c = code, i = length[code] - 1; i >= 0; --i) {
      scratch[static_cast<std::size_t>(i)] = suffix[c];
      c = prefix[c];
    }
    out.insert(out.end(), scratch.begin(), scratch.end());
  };

  while (out.size() < pixel_count) {
    while (bit_count < code_size) {
      if (pos >= data.size()) return out;
      bits |= static_cast<std::uint32_t>(data[pos++]) << bit_count;
      bit_count += 8;
    }
    const int code = static_cast<int>(bits & ((1u << code_size) - 1));
    bits >>= code_size;
    bit_count -= code_size;

    if (code == clear) {
      code_size = min_code_size + 1;
      next_code = eoi + 1;
      prev = -1;
      continue;
    }
    if (code == eoi) break;
    if (prev < 0) {
      if (code >= clear) throw Error(ErrorKind::kCodec, "GIF LZW stream starts with an undefined code");
      emit(code);
      prev = code;
      continue;
    }
    int added = -1;
    if (next_code < kMaxCodes) added = next_code;
    if (code < next_code) {
      emit(code);
      if (added >= 0) {
        prefix[added] = static_cast<std::uint16_t>(prev);
        suffix[added] = first[code];
        first[added] = first[prev];
        length[added] = static_cast<std::uint16_t>(length[prev] + 1);
      }
    } else if (code == next_code && added >= 0) {
      prefix[added] = static_cast<std::uint16_t>(prev);
      suffix[added] = first[prev];
      first[added] = first[prev];
      length[added] = static_cast<std::uint16_t>(length[prev] + 1);
      emit(added);
    } else {
      throw Error(ErrorKind::kCodec, "GIF LZW code out of sequence");
    }
    if (added >= 0) {
      ++next_code;
      if (next_code == (1 << code_size) && code_size < 12) ++code_size;
    }
    prev = code;
  }
  return out;
}

}  // namespace

imaging::ImageBuffer decode_gif(std::span<const std::uint8_t> bytes) {
  ByteCursor in(bytes);
  std::string signature;
  for (int i = 0; i < 6; ++i) signature.push_back(static_cast<char>(in.u8()));
  if (signature != "GIF87a" && signature != "GIF89a") throw Error(ErrorKind::kCodec, "not a GIF stream");

  const int screen_w = in.u16();
  const int screen_h = in.u16();
  const std::uint8_t flags = in.u8();
  const std::uint8_t background = in.u8();
  in.u8();  // pixel aspect ratio
  if (screen_w < 1 || screen_h < 1) throw Error(ErrorKind::kCodec, "GIF has an empty logical screen");

  Palette global;
  if (flags & 0x80) global = read_palette(in, 2 << (flags & 0x07));

  imaging::ImageBuffer canvas(screen_w, screen_h, 3);
  if (!global.empty() && background < global.size()) {
    for (int y = 0; y < screen_h; ++y)
      for (int x = 0; x < screen_w; ++x)
        for (int c = 0; c < 3; ++c) canvas.at(x, y, c) = global[background][static_cast<std::size_t>(c)];
  }

  int transparent = -1;
  while (true) {
    const std::uint8_t block = in.u8();
    if (block == 0x3B) throw Error(ErrorKind::kCodec, "GIF contains no image");
    if (block == 0x21) {
      const std::uint8_t label = in.u8();
      if (label == 0xF9) {
        const auto gce = in.sub_blocks();
        if (gce.size() >= 4 && (gce[0] & 0x01)) transparent = gce[3];
      } else {
        in.skip_sub_blocks();
      }
      continue;
    }
    if (block != 0x2C) throw Error(ErrorKind::kCodec, "GIF has an unknown block type");

    const int left = in.u16();
    const int top = in.u16();
    const int w = in.u16();
    const int h = in.u16();
    const std::uint8_t image_flags = in.u8();
    Palette local;
    if (image_flags & 0x80) local = read_palette(in, 2 << (image_flags & 0x07));
    const Palette& palette = local.empty() ? global : local;
    if (palette.empty()) throw Error(ErrorKind::kCodec, "GIF image has no color table");
    const int min_code_size = in.u8();
    const auto indices = lzw_decode(in.sub_blocks(), min_code_size, static_cast<std::size_t>(w) * h);

    std::vector<int> row_order;
    if (image_flags & 0x40) {
      for (int start : {0, 4, 2, 1}) {
        const int step = start == 0 ? 8 : (start == 4 ? 8 : (start == 2 ? 4 : 2));
        for (int r = start; r < h; r += step) row_order.push_back(r);
      }
    } else {
      for (int r = 0; r < h; ++r) row_order.push_back(r);
    }

    std::size_t i = 0;
    for (int r : row_order) {
      for (int x = 0; x < w; ++x, ++i) {
        if (i >= indices.size()) return canvas;  // short stream: keep what decoded
        const int idx = indices[i];
        const int cx = left + x;
        const int cy = top + r;
        if (idx == transparent || cx >= screen_w || cy >= screen_h) continue;
        if (static_cast<std::size_t>(idx) >= palette.size()) continue;
        for (int c = 0; c < 3; ++c) canvas.at(cx, cy, c) = palette[static_cast<std::size_t>(idx)][static_cast<std::size_t>(c)];
      }
    }
    return canvas;
  }
}

}  // namespace forgeguard::codec
