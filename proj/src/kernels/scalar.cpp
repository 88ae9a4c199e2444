#include <algorithm>
#include <cstddef>

#include "nodemr/kernels/kernels.hpp"

namespace nodemr::kernels::scalar {
namespace {

// Output rows [lo, hi) whose tap at offset `shift` lands inside [0, extent).
struct Range {
  int lo;
  int hi;
};

Range valid_range(int extent, int shift) {
  return {std::max(0, -shift), std::min(extent, extent - shift)};
}

}  // namespace

template <class T>
void conv2d_forward(const ConvShape& s, const T* in, const T* w, const T* bias, T* out) {
  const int H = s.height, W = s.width, k = s.kernel, d = s.dilation, p = s.pad();
  const std::size_t plane = std::size_t(H) * W;
  for (int b = 0; b < s.batch; ++b) {
    const T* in_b = in + std::size_t(b) * s.in_channels * plane;
    T* out_b = out + std::size_t(b) * s.out_channels * plane;
    for (int co = 0; co < s.out_channels; ++co) {
      T* o = out_b + co * plane;
      std::fill(o, o + plane, bias != nullptr ? bias[co] : T(0));
      for (int ci = 0; ci < s.in_channels; ++ci) {
        const T* src = in_b + ci * plane;
        for (int kh = 0; kh < k; ++kh) {
          const int dy = kh * d - p;
          const Range ry = valid_range(H, dy);
          for (int kw = 0; kw < k; ++kw) {
            const int dx = kw * d - p;
            const Range rx = valid_range(W, dx);
            const T wv = w[((std::size_t(co) * s.in_channels + ci) * k + kh) * k + kw];
            for (int y = ry.lo; y < ry.hi; ++y) {
              const T* srow = src + std::size_t(y + dy) * W + dx;
              T* orow = o + std::size_t(y) * W;
              for (int x = rx.lo; x < rx.hi; ++x) orow[x] += wv * srow[x];
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_input(const ConvShape& s, const T* g, const T* w, T* dx_out) {
  const int H = s.height, W = s.width, k = s.kernel, d = s.dilation, p = s.pad();
  const std::size_t plane = std::size_t(H) * W;
  for (int b = 0; b < s.batch; ++b) {
    const T* g_b = g + std::size_t(b) * s.out_channels * plane;
    T* dx_b = dx_out + std::size_t(b) * s.in_channels * plane;
    for (int co = 0; co < s.out_channels; ++co) {
      const T* gp = g_b + co * plane;
      for (int ci = 0; ci < s.in_channels; ++ci) {
        T* dst = dx_b + ci * plane;
        for (int kh = 0; kh < k; ++kh) {
          const int dy = kh * d - p;
          const Range ry = valid_range(H, dy);
          for (int kw = 0; kw < k; ++kw) {
            const int dx = kw * d - p;
            const Range rx = valid_range(W, dx);
            const T wv = w[((std::size_t(co) * s.in_channels + ci) * k + kh) * k + kw];
            for (int y = ry.lo; y < ry.hi; ++y) {
              const T* grow = gp + std::size_t(y) * W;
              T* drow = dst + std::size_t(y + dy) * W + dx;
              for (int x = rx.lo; x < rx.hi; ++x) drow[x] += wv * grow[x];
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_weight(const ConvShape& s, const T* g, const T* in, T* dw, T* db) {
  const int H = s.height, W = s.width, k = s.kernel, d = s.dilation, p = s.pad();
  const std::size_t plane = std::size_t(H) * W;
  for (int b = 0; b < s.batch; ++b) {
    const T* g_b = g + std::size_t(b) * s.out_channels * plane;
    const T* in_b = in + std::size_t(b) * s.in_channels * plane;
    for (int co = 0; co < s.out_channels; ++co) {
      const T* gp = g_b + co * plane;
      if (db != nullptr) {
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
        db[co] += acc;
      }
      for (int ci = 0; ci < s.in_channels; ++ci) {
        const T* src = in_b + ci * plane;
        for (int kh = 0; kh < k; ++kh) {
          const int dy = kh * d - p;
          const Range ry = valid_range(H, dy);
          for (int kw = 0; kw < k; ++kw) {
            const int dx = kw * d - p;
            const Range rx = valid_range(W, dx);
            T acc = 0;
            for (int y = ry.lo; y < ry.hi; ++y) {
              const T* grow = gp + std::size_t(y) * W;
              const T* srow = src + std::size_t(y + dy) * W + dx;
              for (int x = rx.lo; x < rx.hi; ++x) acc += grow[x] * srow[x];
            }
            dw[((std::size_t(co) * s.in_channels + ci) * k + kh) * k + kw] += acc;
          }
        }
      }
    }
  }
}

template <class T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void relu_forward(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward(std::size_t n, const T* x, const T* g, T* dx) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > T(0)) dx[i] += g[i];
  }
}

#define NODEMR_INSTANTIATE(T)                                                                  \
  template void conv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*);        \
  template void conv2d_backward_input<T>(const ConvShape&, const T*, const T*, T*);           \
  template void conv2d_backward_weight<T>(const ConvShape&, const T*, const T*, T*, T*);      \
  template void axpy<T>(std::size_t, T, const T*, T*);                                        \
  template void relu_forward<T>(std::size_t, const T*, T*);                                   \
  template void relu_backward<T>(std::size_t, const T*, const T*, T*);

NODEMR_INSTANTIATE(float)
NODEMR_INSTANTIATE(double)

#undef NODEMR_INSTANTIATE

}  // namespace nodemr::kernels::scalar
