#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "forgeguard/simd/kernels.hpp"

namespace forgeguard::nn {

// NHWC float activations for a single example.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c);

  std::size_t size() const noexcept { return data.size(); }
  float* pixel(int y, int x) noexcept { return data.data() + (static_cast<std::size_t>(y) * width + x) * channels; }
  const float* pixel(int y, int x) const noexcept {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
};

struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;
};

// TensorFlow "same" padding: output is ceil(in / stride), the odd pixel goes
// to the bottom/right.
Padding same_padding(int in_height, int in_width, int kernel, int stride);

FeatureMap zero_pad(const FeatureMap& input, const Padding& pad);

// Weights are HWIO: [kernel_h][kernel_w][in_channels][out_channels]. bias may
// be empty.
FeatureMap conv2d(const FeatureMap& input, std::span<const float> weights, std::span<const float> bias, int kernel_h,
                  int kernel_w, int out_channels, int stride, const Padding& pad, const simd::KernelTable& kernels);

// Depth multiplier 1; weights are [kernel][kernel][channels].
FeatureMap depthwise_conv2d(const FeatureMap& input, std::span<const float> weights, std::span<const float> bias,
                            int kernel, int stride, const Padding& pad, const simd::KernelTable& kernels);

// Unpadded max pooling. ceil_mode keeps a final partial window as long as it
// starts inside the input.
FeatureMap max_pool(const FeatureMap& input, int kernel, int stride, bool ceil_mode);

// out = in * weights + bias with weights laid out [in][out].
std::vector<float> dense(std::span<const float> input, std::span<const float> weights, std::span<const float> bias,
                         int out_features, const simd::KernelTable& kernels);

std::vector<float> global_average_pool(const FeatureMap& input);

// Per-channel y = x * scale + shift, i.e. inference-time batch norm folded.
void scale_shift(FeatureMap& map, std::span<const float> scale, std::span<const float> shift);

void prelu(std::span<float> values, std::span<const float> alpha, int channels);
void relu_inplace(std::span<float> values);
void sigmoid_inplace(std::span<float> values);
void swish_inplace(std::span<float> values);

}  // namespace forgeguard::nn
