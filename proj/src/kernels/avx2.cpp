#include <immintrin.h>

#include "conv_driver.hpp"
#include "variants.hpp"

#define NODEMR_AVX2 __attribute__((target("avx2,fma")))

namespace nodemr::kernels::avx2 {
namespace {

// All-ones lanes for indices < n.
NODEMR_AVX2 inline __m256i lane_mask(int n) {
  const __m256i iota = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  return _mm256_cmpgt_epi32(_mm256_set1_epi32(n), iota);
}

NODEMR_AVX2 inline float horizontal_sum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_movehdup_ps(s));
  return _mm_cvtss_f32(s);
}

// MR output channels x 16 pixels.
template <int MR>
NODEMR_AVX2 void forward_tile(int taps, const float* wp, const float* src, const int* off, float* out, int ldo,
                              const float* bias, int n, bool accumulate) {
  __m256 c0[MR], c1[MR];
  for (int r = 0; r < MR; ++r) {
    c0[r] = bias != nullptr ? _mm256_set1_ps(bias[r]) : _mm256_setzero_ps();
    c1[r] = c0[r];
  }
  for (int k = 0; k < taps; ++k) {
    const float* s = src + off[k];
    const __m256 b0 = _mm256_loadu_ps(s);
    const __m256 b1 = _mm256_loadu_ps(s + 8);
#pragma GCC unroll 4
    for (int r = 0; r < MR; ++r) {
      const __m256 a = _mm256_broadcast_ss(wp + k * MR + r);
      c0[r] = _mm256_fmadd_ps(a, b0, c0[r]);
      c1[r] = _mm256_fmadd_ps(a, b1, c1[r]);
    }
  }
  const __m256i m0 = lane_mask(n);
  const __m256i m1 = lane_mask(n - 8);
  for (int r = 0; r < MR; ++r) {
    float* o = out + std::size_t(r) * ldo;
    if (accumulate) {
      c0[r] = _mm256_add_ps(c0[r], _mm256_maskload_ps(o, m0));
      c1[r] = _mm256_add_ps(c1[r], _mm256_maskload_ps(o + 8, m1));
    }
    _mm256_maskstore_ps(o, m0, c0[r]);
    _mm256_maskstore_ps(o + 8, m1, c1[r]);
  }
}

// dw[MR][KB] += sum over pixels of g[r] * tap[j], 8 pixels per step.
template <int MR, int KB>
NODEMR_AVX2 void weight_tile(int H, int W, int wp, const float* g, int ldg, const float* padded, const int* off,
                             float* dw, int lddw) {
  __m256 acc[MR][KB];
  for (int r = 0; r < MR; ++r)
    for (int j = 0; j < KB; ++j) acc[r][j] = _mm256_setzero_ps();
  for (int y = 0; y < H; ++y) {
    const float* grow = g + std::size_t(y) * W;
    const float* srow[KB];
    for (int j = 0; j < KB; ++j) srow[j] = padded + off[j] + std::size_t(y) * wp;
    for (int x = 0; x < W; x += 8) {
      const __m256i m = lane_mask(W - x);
      __m256 gv[MR];
#pragma GCC unroll 4
      for (int r = 0; r < MR; ++r) gv[r] = _mm256_maskload_ps(grow + std::size_t(r) * ldg + x, m);
#pragma GCC unroll 8
      for (int j = 0; j < KB; ++j) {
        const __m256 sv = _mm256_loadu_ps(srow[j] + x);
#pragma GCC unroll 4
        for (int r = 0; r < MR; ++r) acc[r][j] = _mm256_fmadd_ps(gv[r], sv, acc[r][j]);
      }
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int j = 0; j < KB; ++j) dw[std::size_t(r) * lddw + j] += horizontal_sum(acc[r][j]);
}

template <int MR>
void weight_tile_rows(int kb, int H, int W, int wp, const float* g, int ldg, const float* padded, const int* off,
                      float* dw, int lddw) {
  switch (kb) {
    case 5: weight_tile<MR, 5>(H, W, wp, g, ldg, padded, off, dw, lddw); break;
    case 4: weight_tile<MR, 4>(H, W, wp, g, ldg, padded, off, dw, lddw); break;
    case 3: weight_tile<MR, 3>(H, W, wp, g, ldg, padded, off, dw, lddw); break;
    case 2: weight_tile<MR, 2>(H, W, wp, g, ldg, padded, off, dw, lddw); break;
    default: weight_tile<MR, 1>(H, W, wp, g, ldg, padded, off, dw, lddw); break;
  }
}

struct Traits {
  static constexpr int kTile = 16;
  static constexpr int kGradTile = 8;
  static constexpr int kRowSizes[] = {4, 2, 1};
  static constexpr int kGradRowSizes[] = {2, 1};
  static constexpr int kGradTaps = 5;

  static void forward_tile(int mr, int taps, const float* wp, const float* src, const int* off, float* out, int ldo,
                           const float* bias, int n, bool accumulate) {
    switch (mr) {
      case 4: avx2::forward_tile<4>(taps, wp, src, off, out, ldo, bias, n, accumulate); break;
      case 2: avx2::forward_tile<2>(taps, wp, src, off, out, ldo, bias, n, accumulate); break;
      default: avx2::forward_tile<1>(taps, wp, src, off, out, ldo, bias, n, accumulate); break;
    }
  }

  static void weight_tile(int mr, int kb, int H, int W, int wp, const float* g, int ldg, const float* padded,
                          const int* off, float* dw, int lddw) {
    if (mr == 2) {
      weight_tile_rows<2>(kb, H, W, wp, g, ldg, padded, off, dw, lddw);
    } else {
      weight_tile_rows<1>(kb, H, W, wp, g, ldg, padded, off, dw, lddw);
    }
  }
};

}  // namespace

void conv2d_forward(const ConvShape& s, const float* in, const float* w, const float* bias, float* out) {
  detail::conv_forward<Traits>(s, in, w, bias, out, /*accumulate=*/false);
}

void conv2d_backward_input(const ConvShape& s, const float* g, const float* w, float* dx) {
  detail::conv_backward_input<Traits>(s, g, w, dx);
}

void conv2d_backward_weight(const ConvShape& s, const float* g, const float* in, float* dw, float* db) {
  detail::conv_backward_weight<Traits>(s, g, in, dw, db);
}

NODEMR_AVX2 void axpy(std::size_t n, float a, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_mul_ps(av, _mm256_loadu_ps(x + i))));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

NODEMR_AVX2 void relu_forward(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

NODEMR_AVX2 void relu_backward(std::size_t n, const float* x, const float* g, float* dx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 d = _mm256_loadu_ps(dx + i);
    _mm256_storeu_ps(dx + i, _mm256_blendv_ps(d, _mm256_add_ps(d, _mm256_loadu_ps(g + i)), pos));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) dx[i] += g[i];
  }
}

}  // namespace nodemr::kernels::avx2
