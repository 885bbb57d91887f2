#pragma once

#include <cstddef>
#include <string_view>

namespace forgeguard::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa);

// NHWC depthwise convolution over an input that is already zero-padded.
// weights are laid out [kernel][kernel][channels]; output is
// [out_height][out_width][channels] and is overwritten.
struct DepthwiseArgs {
  const float* input = nullptr;
  int in_height = 0;
  int in_width = 0;
  int channels = 0;
  const float* weights = nullptr;
  int kernel = 0;
  int stride = 1;
  float* output = nullptr;
  int out_height = 0;
  int out_width = 0;
};

// One implementation of every data-parallel inner loop. The scalar table is
// the reference; vector tables must agree with it (bit-exactly for lerp,
// within float rounding for the reductions).
struct KernelTable {
  Isa isa;

  // C[m x n] = A[m x k] * B[k x n] (+ C when accumulate); row-major with
  // leading dimensions lda/ldb/ldc.
  void (*gemm)(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
               bool accumulate);

  float (*dot)(const float* a, const float* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);

  // out = a + (b - a) * t, evaluated as sub, mul, add with no fusion.
  void (*lerp)(const float* a, const float* b, float t, float* out, std::size_t n);

  void (*depthwise)(const DepthwiseArgs& args);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// Best table for this CPU. FORGEGUARD_SIMD=scalar|avx2 overrides the choice
// (an unavailable request falls back to scalar). Resolved once per process.
const KernelTable& active();

}  // namespace forgeguard::simd
