#include "forgeguard/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "forgeguard/core/error.hpp"

namespace forgeguard::nn {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::kInvalidArgument, what);
}

}  // namespace

FeatureMap::FeatureMap(int h, int w, int c)
    : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0.0f) {}

Padding same_padding(int in_height, int in_width, int kernel, int stride) {
  auto one = [&](int in, int& lo, int& hi) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    lo = total / 2;
    hi = total - lo;
  };
  Padding p;
  one(in_height, p.top, p.bottom);
  one(in_width, p.left, p.right);
  return p;
}

FeatureMap zero_pad(const FeatureMap& input, const Padding& pad) {
  if (pad.top == 0 && pad.bottom == 0 && pad.left == 0 && pad.right == 0) return input;
  FeatureMap out(input.height + pad.top + pad.bottom, input.width + pad.left + pad.right, input.channels);
  const std::size_t row = static_cast<std::size_t>(input.width) * input.channels;
  for (int y = 0; y < input.height; ++y) {
    std::copy_n(input.pixel(y, 0), row, out.pixel(y + pad.top, pad.left));
  }
  return out;
}

FeatureMap conv2d(const FeatureMap& input, std::span<const float> weights, std::span<const float> bias, int kernel_h,
                  int kernel_w, int out_channels, int stride, const Padding& pad, const simd::KernelTable& kernels) {
  const int cin = input.channels;
  require(weights.size() == static_cast<std::size_t>(kernel_h) * kernel_w * cin * out_channels,
          "conv2d weight shape does not match input channels");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(out_channels), "conv2d bias size mismatch");
  const FeatureMap src = zero_pad(input, pad);
  require(src.height >= kernel_h && src.width >= kernel_w, "conv2d input smaller than kernel");
  const int oh = (src.height - kernel_h) / stride + 1;
  const int ow = (src.width - kernel_w) / stride + 1;
  FeatureMap out(oh, ow, out_channels);
  const int k = kernel_h * kernel_w * cin;
  const int m = oh * ow;

  if (kernel_h == 1 && kernel_w == 1 && stride == 1) {
    kernels.gemm(m, out_channels, k, src.data.data(), k, weights.data(), out_channels, out.data.data(), out_channels,
                 false);
  } else {
    // im2col, one output row at a time to bound the scratch buffer.
    std::vector<float> cols(static_cast<std::size_t>(ow) * k);
    const std::size_t patch_row = static_cast<std::size_t>(kernel_w) * cin;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float* dst = cols.data() + static_cast<std::size_t>(ox) * k;
        for (int ky = 0; ky < kernel_h; ++ky) {
          std::copy_n(src.pixel(oy * stride + ky, ox * stride), patch_row, dst + ky * patch_row);
        }
      }
      kernels.gemm(ow, out_channels, k, cols.data(), k, weights.data(), out_channels, out.pixel(oy, 0), out_channels,
                   false);
    }
  }
  if (!bias.empty()) {
    for (int i = 0; i < m; ++i) {
      float* px = out.data.data() + static_cast<std::size_t>(i) * out_channels;
      for (int c = 0; c < out_channels; ++c) px[c] += bias[c];
    }
  }
  return out;
}

FeatureMap depthwise_conv2d(const FeatureMap& input, std::span<const float> weights, std::span<const float> bias,
                            int kernel, int stride, const Padding& pad, const simd::KernelTable& kernels) {
  const int c = input.channels;
  require(weights.size() == static_cast<std::size_t>(kernel) * kernel * c, "depthwise weight shape mismatch");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(c), "depthwise bias size mismatch");
  const FeatureMap src = zero_pad(input, pad);
  require(src.height >= kernel && src.width >= kernel, "depthwise input smaller than kernel");
  FeatureMap out((src.height - kernel) / stride + 1, (src.width - kernel) / stride + 1, c);
  simd::DepthwiseArgs args;
  args.input = src.data.data();
  args.in_height = src.height;
  args.in_width = src.width;
  args.channels = c;
  args.weights = weights.data();
  args.kernel = kernel;
  args.stride = stride;
  args.output = out.data.data();
  args.out_height = out.height;
  args.out_width = out.width;
  kernels.depthwise(args);
  if (!bias.empty()) {
    for (std::size_t i = 0; i < out.size(); i += c) {
      for (int ch = 0; ch < c; ++ch) out.data[i + ch] += bias[ch];
    }
  }
  return out;
}

FeatureMap max_pool(const FeatureMap& input, int kernel, int stride, bool ceil_mode) {
  require(input.height >= kernel && input.width >= kernel, "max_pool input smaller than kernel");
  auto out_dim = [&](int in) {
    int span = in - kernel;
    int n = (ceil_mode ? (span + stride - 1) / stride : span / stride) + 1;
    if (ceil_mode && (n - 1) * stride >= in) --n;
    return n;
  };
  const int c = input.channels;
  FeatureMap out(out_dim(input.height), out_dim(input.width), c);
  for (int oy = 0; oy < out.height; ++oy) {
    const int y0 = oy * stride;
    const int y1 = std::min(y0 + kernel, input.height);
    for (int ox = 0; ox < out.width; ++ox) {
      const int x0 = ox * stride;
      const int x1 = std::min(x0 + kernel, input.width);
      float* dst = out.pixel(oy, ox);
      std::fill_n(dst, c, -std::numeric_limits<float>::infinity());
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const float* src = input.pixel(y, x);
          for (int ch = 0; ch < c; ++ch) dst[ch] = std::max(dst[ch], src[ch]);
        }
      }
    }
  }
  return out;
}

std::vector<float> dense(std::span<const float> input, std::span<const float> weights, std::span<const float> bias,
                         int out_features, const simd::KernelTable& kernels) {
  const int n = static_cast<int>(input.size());
  require(weights.size() == static_cast<std::size_t>(n) * out_features, "dense weight shape mismatch");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(out_features), "dense bias size mismatch");
  std::vector<float> out(static_cast<std::size_t>(out_features), 0.0f);
  kernels.gemm(1, out_features, n, input.data(), n, weights.data(), out_features, out.data(), out_features, false);
  for (std::size_t i = 0; i < bias.size(); ++i) out[i] += bias[i];
  return out;
}

std::vector<float> global_average_pool(const FeatureMap& input) {
  std::vector<double> acc(static_cast<std::size_t>(input.channels), 0.0);
  for (std::size_t i = 0; i < input.size(); i += input.channels) {
    for (int c = 0; c < input.channels; ++c) acc[c] += input.data[i + c];
  }
  const double n = static_cast<double>(input.height) * input.width;
  std::vector<float> out(acc.size());
  for (std::size_t c = 0; c < acc.size(); ++c) out[c] = static_cast<float>(acc[c] / n);
  return out;
}

void scale_shift(FeatureMap& map, std::span<const float> scale, std::span<const float> shift) {
  const int c = map.channels;
  require(scale.size() == static_cast<std::size_t>(c) && shift.size() == static_cast<std::size_t>(c),
          "scale_shift size mismatch");
  for (std::size_t i = 0; i < map.size(); i += c) {
    for (int ch = 0; ch < c; ++ch) map.data[i + ch] = map.data[i + ch] * scale[ch] + shift[ch];
  }
}

void prelu(std::span<float> values, std::span<const float> alpha, int channels) {
  require(alpha.size() == static_cast<std::size_t>(channels), "prelu alpha size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    float& v = values[i];
    if (v < 0.0f) v *= alpha[i % channels];
  }
}

void relu_inplace(std::span<float> values) {
  for (float& v : values) v = std::max(v, 0.0f);
}

void sigmoid_inplace(std::span<float> values) {
  for (float& v : values) v = 1.0f / (1.0f + std::exp(-v));
}

void swish_inplace(std::span<float> values) {
  for (float& v : values) v = v / (1.0f + std::exp(-v));
}

}  // namespace forgeguard::nn
