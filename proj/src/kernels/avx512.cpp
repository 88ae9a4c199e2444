#include <immintrin.h>

#include "conv_driver.hpp"
#include "variants.hpp"

#define NODEMR_AVX512 __attribute__((target("avx512f,avx2,fma")))

namespace nodemr::kernels::avx512 {
namespace {

NODEMR_AVX512 inline __mmask16 lane_mask(int n) {
  if (n >= 16) return __mmask16(0xFFFF);
  if (n <= 0) return __mmask16(0);
  return __mmask16((1u << n) - 1u);
}

// MR output channels x 32 pixels.
template <int MR>
NODEMR_AVX512 void forward_tile(int taps, const float* wp, const float* src, const int* off, float* out, int ldo,
                                const float* bias, int n, bool accumulate) {
  __m512 c0[MR], c1[MR];
  for (int r = 0; r < MR; ++r) {
    c0[r] = bias != nullptr ? _mm512_set1_ps(bias[r]) : _mm512_setzero_ps();
    c1[r] = c0[r];
  }
  for (int k = 0; k < taps; ++k) {
    const float* s = src + off[k];
    const __m512 b0 = _mm512_loadu_ps(s);
    const __m512 b1 = _mm512_loadu_ps(s + 16);
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
      const __m512 a = _mm512_set1_ps(wp[k * MR + r]);
      c0[r] = _mm512_fmadd_ps(a, b0, c0[r]);
      c1[r] = _mm512_fmadd_ps(a, b1, c1[r]);
    }
  }
  const __mmask16 m0 = lane_mask(n);
  const __mmask16 m1 = lane_mask(n - 16);
  for (int r = 0; r < MR; ++r) {
    float* o = out + std::size_t(r) * ldo;
    if (accumulate) {
      c0[r] = _mm512_add_ps(c0[r], _mm512_maskz_loadu_ps(m0, o));
      c1[r] = _mm512_add_ps(c1[r], _mm512_maskz_loadu_ps(m1, o + 16));
    }
    _mm512_mask_storeu_ps(o, m0, c0[r]);
    _mm512_mask_storeu_ps(o + 16, m1, c1[r]);
  }
}

// dw[MR][KB] += sum over pixels of g[r] * tap[j], 16 pixels per step.
template <int MR, int KB>
NODEMR_AVX512 void weight_tile(int H, int W, int wp, const float* g, int ldg, const float* padded, const int* off,
                               float* dw, int lddw) {
  __m512 acc[MR][KB];
  for (int r = 0; r < MR; ++r)
    for (int j = 0; j < KB; ++j) acc[r][j] = _mm512_setzero_ps();
  for (int y = 0; y < H; ++y) {
    const float* grow = g + std::size_t(y) * W;
    const float* srow[KB];
    for (int j = 0; j < KB; ++j) srow[j] = padded + off[j] + std::size_t(y) * wp;
    for (int x = 0; x < W; x += 16) {
      const __mmask16 m = lane_mask(W - x);
      __m512 gv[MR];
#pragma GCC unroll 8
      for (int r = 0; r < MR; ++r) gv[r] = _mm512_maskz_loadu_ps(m, grow + std::size_t(r) * ldg + x);
#pragma GCC unroll 8
      for (int j = 0; j < KB; ++j) {
        const __m512 sv = _mm512_loadu_ps(srow[j] + x);
#pragma GCC unroll 8
        for (int r = 0; r < MR; ++r) acc[r][j] = _mm512_fmadd_ps(gv[r], sv, acc[r][j]);
      }
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int j = 0; j < KB; ++j) dw[std::size_t(r) * lddw + j] += _mm512_reduce_add_ps(acc[r][j]);
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
  static constexpr int kTile = 32;
  static constexpr int kGradTile = 16;
  static constexpr int kRowSizes[] = {8, 4, 2, 1};
  static constexpr int kGradRowSizes[] = {4, 2, 1};
  static constexpr int kGradTaps = 5;

  static void forward_tile(int mr, int taps, const float* wp, const float* src, const int* off, float* out, int ldo,
                           const float* bias, int n, bool accumulate) {
    switch (mr) {
      case 8: avx512::forward_tile<8>(taps, wp, src, off, out, ldo, bias, n, accumulate); break;
      case 4: avx512::forward_tile<4>(taps, wp, src, off, out, ldo, bias, n, accumulate); break;
      case 2: avx512::forward_tile<2>(taps, wp, src, off, out, ldo, bias, n, accumulate); break;
      default: avx512::forward_tile<1>(taps, wp, src, off, out, ldo, bias, n, accumulate); break;
    }
  }

  static void weight_tile(int mr, int kb, int H, int W, int wp, const float* g, int ldg, const float* padded,
                          const int* off, float* dw, int lddw) {
    switch (mr) {
      case 4: weight_tile_rows<4>(kb, H, W, wp, g, ldg, padded, off, dw, lddw); break;
      case 2: weight_tile_rows<2>(kb, H, W, wp, g, ldg, padded, off, dw, lddw); break;
      default: weight_tile_rows<1>(kb, H, W, wp, g, ldg, padded, off, dw, lddw); break;
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

// Elementwise kernels avoid FMA so they round exactly like the scalar loops.

NODEMR_AVX512 void axpy(std::size_t n, float a, const float* x, float* y) {
  const __m512 av = _mm512_set1_ps(a);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    _mm512_storeu_ps(y + i, _mm512_add_ps(_mm512_loadu_ps(y + i), _mm512_mul_ps(av, _mm512_loadu_ps(x + i))));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

NODEMR_AVX512 void relu_forward(std::size_t n, const float* x, float* y) {
  const __m512 zero = _mm512_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) _mm512_storeu_ps(y + i, _mm512_max_ps(_mm512_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

NODEMR_AVX512 void relu_backward(std::size_t n, const float* x, const float* g, float* dx) {
  const __m512 zero = _mm512_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __mmask16 pos = _mm512_cmp_ps_mask(_mm512_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m512 d = _mm512_loadu_ps(dx + i);
    _mm512_storeu_ps(dx + i, _mm512_mask_add_ps(d, pos, d, _mm512_loadu_ps(g + i)));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) dx[i] += g[i];
  }
}

}  // namespace nodemr::kernels::avx512
