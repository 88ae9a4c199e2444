#pragma once

// Inner loops of the tensor library. Every kernel has a scalar reference
// (templated over float/double) and, for float, AVX2 and AVX-512 variants
// picked at runtime by the dispatching overloads below. Double precision
// always runs the scalar reference.

#include <cstddef>
#include <cstdint>

namespace nodemr::kernels {

/// Geometry of a batched same-size 2D cross-correlation (NCHW, OIHW weights).
struct ConvShape {
  int batch = 1;
  int in_channels = 1;
  int out_channels = 1;
  int height = 1;
  int width = 1;
  int kernel = 3;  // square, odd
  int dilation = 1;

  int pad() const { return dilation * (kernel - 1) / 2; }
  std::int64_t taps() const { return std::int64_t(in_channels) * kernel * kernel; }
};

namespace scalar {

// out = bias + conv(in, w)
template <class T>
void conv2d_forward(const ConvShape& s, const T* in, const T* w, const T* bias, T* out);

// dx += conv_transpose(g, w)
template <class T>
void conv2d_backward_input(const ConvShape& s, const T* g, const T* w, T* dx);

// dw += correlation of g with in; db += spatial sums of g. db may be null.
template <class T>
void conv2d_backward_weight(const ConvShape& s, const T* g, const T* in, T* dw, T* db);

// y += a * x
template <class T>
void axpy(std::size_t n, T a, const T* x, T* y);

// y = max(x, 0)
template <class T>
void relu_forward(std::size_t n, const T* x, T* y);

// dx += g where x > 0
template <class T>
void relu_backward(std::size_t n, const T* x, const T* g, T* dx);

}  // namespace scalar

void conv2d_forward(const ConvShape& s, const float* in, const float* w, const float* bias, float* out);
void conv2d_forward(const ConvShape& s, const double* in, const double* w, const double* bias, double* out);

void conv2d_backward_input(const ConvShape& s, const float* g, const float* w, float* dx);
void conv2d_backward_input(const ConvShape& s, const double* g, const double* w, double* dx);

void conv2d_backward_weight(const ConvShape& s, const float* g, const float* in, float* dw, float* db);
void conv2d_backward_weight(const ConvShape& s, const double* g, const double* in, double* dw, double* db);

void axpy(std::size_t n, float a, const float* x, float* y);
void axpy(std::size_t n, double a, const double* x, double* y);

void relu_forward(std::size_t n, const float* x, float* y);
void relu_forward(std::size_t n, const double* x, double* y);

void relu_backward(std::size_t n, const float* x, const float* g, float* dx);
void relu_backward(std::size_t n, const double* x, const double* g, double* dx);

}  // namespace nodemr::kernels
