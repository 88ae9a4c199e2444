#pragma once

#include <cstddef>

#include "nodemr/kernels/kernels.hpp"

namespace nodemr::kernels {

#define NODEMR_DECLARE_FLOAT_VARIANT(ns)                                                          \
  namespace ns {                                                                                  \
  void conv2d_forward(const ConvShape& s, const float* in, const float* w, const float* bias,     \
                      float* out);                                                                \
  void conv2d_backward_input(const ConvShape& s, const float* g, const float* w, float* dx);     \
  void conv2d_backward_weight(const ConvShape& s, const float* g, const float* in, float* dw,    \
                              float* db);                                                         \
  void axpy(std::size_t n, float a, const float* x, float* y);                                   \
  void relu_forward(std::size_t n, const float* x, float* y);                                    \
  void relu_backward(std::size_t n, const float* x, const float* g, float* dx);                  \
  }

NODEMR_DECLARE_FLOAT_VARIANT(avx2)
NODEMR_DECLARE_FLOAT_VARIANT(avx512)

#undef NODEMR_DECLARE_FLOAT_VARIANT

}  // namespace nodemr::kernels
