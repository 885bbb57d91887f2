#include <immintrin.h>

#include <cmath>

#include "forgeguard/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace forgeguard::simd {
namespace {

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

// 4 x 16 register tile: rows i..i+3 of C, columns j..j+15.
inline void gemm_tile_4x16(int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
                           bool accumulate) {
  __m256 c00, c01, c10, c11, c20, c21, c30, c31;
  if (accumulate) {
    c00 = _mm256_loadu_ps(c);
    c01 = _mm256_loadu_ps(c + 8);
    c10 = _mm256_loadu_ps(c + ldc);
    c11 = _mm256_loadu_ps(c + ldc + 8);
    c20 = _mm256_loadu_ps(c + 2 * ldc);
    c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
    c30 = _mm256_loadu_ps(c + 3 * ldc);
    c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_ps();
  }
  for (int p = 0; p < k; ++p) {
    const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    __m256 av = _mm256_broadcast_ss(a + p);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a + lda + p);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a + 2 * lda + p);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a + 3 * lda + p);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
  }
  _mm256_storeu_ps(c, c00);
  _mm256_storeu_ps(c + 8, c01);
  _mm256_storeu_ps(c + ldc, c10);
  _mm256_storeu_ps(c + ldc + 8, c11);
  _mm256_storeu_ps(c + 2 * ldc, c20);
  _mm256_storeu_ps(c + 2 * ldc + 8, c21);
  _mm256_storeu_ps(c + 3 * ldc, c30);
  _mm256_storeu_ps(c + 3 * ldc + 8, c31);
}

// One row of C over columns [j0, n), 8 at a time with a scalar tail.
inline void gemm_row(int j0, int n, int k, const float* arow, const float* b, int ldb, float* crow,
                     bool accumulate) {
  int j = j0;
  for (; j + 8 <= n; j += 8) {
    __m256 acc = accumulate ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
    for (int p = 0; p < k; ++p) {
      acc = _mm256_fmadd_ps(_mm256_broadcast_ss(arow + p), _mm256_loadu_ps(b + static_cast<std::ptrdiff_t>(p) * ldb + j),
                            acc);
    }
    _mm256_storeu_ps(crow + j, acc);
  }
  for (; j < n; ++j) {
    float acc = accumulate ? crow[j] : 0.0f;
    for (int p = 0; p < k; ++p) acc = std::fma(arow[p], b[static_cast<std::ptrdiff_t>(p) * ldb + j], acc);
    crow[j] = acc;
  }
}

void gemm_avx2(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
               bool accumulate) {
  const int n16 = n - n % 16;
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const float* ablock = a + static_cast<std::ptrdiff_t>(i) * lda;
    float* cblock = c + static_cast<std::ptrdiff_t>(i) * ldc;
    for (int j = 0; j < n16; j += 16) {
      gemm_tile_4x16(k, ablock, lda, b + j, ldb, cblock + j, ldc, accumulate);
    }
    for (int r = 0; r < 4; ++r) {
      gemm_row(n16, n, k, ablock + static_cast<std::ptrdiff_t>(r) * lda, b, ldb,
               cblock + static_cast<std::ptrdiff_t>(r) * ldc, accumulate);
    }
  }
  for (; i < m; ++i) {
    gemm_row(0, n, k, a + static_cast<std::ptrdiff_t>(i) * lda, b, ldb, c + static_cast<std::ptrdiff_t>(i) * ldc,
             accumulate);
  }
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float sum = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void lerp_avx2(const float* a, const float* b, float t, float* out, std::size_t n) {
  const __m256 tv = _mm256_set1_ps(t);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 av = _mm256_loadu_ps(a + i);
    const __m256 diff = _mm256_sub_ps(_mm256_loadu_ps(b + i), av);
    _mm256_storeu_ps(out + i, _mm256_add_ps(av, _mm256_mul_ps(diff, tv)));
  }
  for (; i < n; ++i) {
    const float diff = b[i] - a[i];
    const float scaled = diff * t;
    out[i] = a[i] + scaled;
  }
}

void depthwise_avx2(const DepthwiseArgs& args) {
  const int c = args.channels;
  const int c8 = c - c % 8;
  for (int oy = 0; oy < args.out_height; ++oy) {
    for (int ox = 0; ox < args.out_width; ++ox) {
      float* out = args.output + (static_cast<std::ptrdiff_t>(oy) * args.out_width + ox) * c;
      for (int ch = 0; ch < c8; ch += 8) {
        __m256 acc = _mm256_setzero_ps();
        for (int ky = 0; ky < args.kernel; ++ky) {
          const int iy = oy * args.stride + ky;
          for (int kx = 0; kx < args.kernel; ++kx) {
            const int ix = ox * args.stride + kx;
            const float* in = args.input + (static_cast<std::ptrdiff_t>(iy) * args.in_width + ix) * c + ch;
            const float* w = args.weights + (static_cast<std::ptrdiff_t>(ky) * args.kernel + kx) * c + ch;
            acc = _mm256_fmadd_ps(_mm256_loadu_ps(in), _mm256_loadu_ps(w), acc);
          }
        }
        _mm256_storeu_ps(out + ch, acc);
      }
      for (int ch = c8; ch < c; ++ch) {
        float acc = 0.0f;
        for (int ky = 0; ky < args.kernel; ++ky) {
          const int iy = oy * args.stride + ky;
          for (int kx = 0; kx < args.kernel; ++kx) {
            const int ix = ox * args.stride + kx;
            acc = std::fma(args.input[(static_cast<std::ptrdiff_t>(iy) * args.in_width + ix) * c + ch],
                           args.weights[(static_cast<std::ptrdiff_t>(ky) * args.kernel + kx) * c + ch], acc);
          }
        }
        out[ch] = acc;
      }
    }
  }
}

}  // namespace

namespace detail {

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::kAvx2, gemm_avx2, dot_avx2, axpy_avx2, lerp_avx2, depthwise_avx2};
  return table;
}

}  // namespace detail
}  // namespace forgeguard::simd
