#include "forgeguard/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace forgeguard::simd {
namespace {

void gemm_scalar(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
                 bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    }
    const float* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void lerp_scalar(const float* a, const float* b, float t, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float diff = b[i] - a[i];
    const float scaled = diff * t;
    out[i] = a[i] + scaled;
  }
}

void depthwise_scalar(const DepthwiseArgs& args) {
  const int c = args.channels;
  for (int oy = 0; oy < args.out_height; ++oy) {
    for (int ox = 0; ox < args.out_width; ++ox) {
      float* out = args.output + (static_cast<std::ptrdiff_t>(oy) * args.out_width + ox) * c;
      for (int ch = 0; ch < c; ++ch) out[ch] = 0.0f;
      for (int ky = 0; ky < args.kernel; ++ky) {
        const int iy = oy * args.stride + ky;
        for (int kx = 0; kx < args.kernel; ++kx) {
          const int ix = ox * args.stride + kx;
          const float* in = args.input + (static_cast<std::ptrdiff_t>(iy) * args.in_width + ix) * c;
          const float* w = args.weights + (static_cast<std::ptrdiff_t>(ky) * args.kernel + kx) * c;
          for (int ch = 0; ch < c; ++ch) out[ch] += in[ch] * w[ch];
        }
      }
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::kScalar, gemm_scalar, dot_scalar, axpy_scalar, lerp_scalar,
                                 depthwise_scalar};
  return table;
}

}  // namespace forgeguard::simd
