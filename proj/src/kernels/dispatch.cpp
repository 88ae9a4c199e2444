#include "nodemr/kernels/isa.hpp"
#include "nodemr/kernels/kernels.hpp"
#include "variants.hpp"

namespace nodemr::kernels {

#define NODEMR_DISPATCH(fn, ...)                          \
  switch (active_isa()) {                                 \
    case Isa::avx512: return avx512::fn(__VA_ARGS__);     \
    case Isa::avx2: return avx2::fn(__VA_ARGS__);         \
    case Isa::scalar: break;                              \
  }                                                       \
  return scalar::fn(__VA_ARGS__)

void conv2d_forward(const ConvShape& s, const float* in, const float* w, const float* bias, float* out) {
  NODEMR_DISPATCH(conv2d_forward, s, in, w, bias, out);
}

void conv2d_backward_input(const ConvShape& s, const float* g, const float* w, float* dx) {
  NODEMR_DISPATCH(conv2d_backward_input, s, g, w, dx);
}

void conv2d_backward_weight(const ConvShape& s, const float* g, const float* in, float* dw, float* db) {
  NODEMR_DISPATCH(conv2d_backward_weight, s, g, in, dw, db);
}

void axpy(std::size_t n, float a, const float* x, float* y) { NODEMR_DISPATCH(axpy, n, a, x, y); }

void relu_forward(std::size_t n, const float* x, float* y) { NODEMR_DISPATCH(relu_forward, n, x, y); }

void relu_backward(std::size_t n, const float* x, const float* g, float* dx) {
  NODEMR_DISPATCH(relu_backward, n, x, g, dx);
}

#undef NODEMR_DISPATCH

void conv2d_forward(const ConvShape& s, const double* in, const double* w, const double* bias, double* out) {
  scalar::conv2d_forward(s, in, w, bias, out);
}

void conv2d_backward_input(const ConvShape& s, const double* g, const double* w, double* dx) {
  scalar::conv2d_backward_input(s, g, w, dx);
}

void conv2d_backward_weight(const ConvShape& s, const double* g, const double* in, double* dw, double* db) {
  scalar::conv2d_backward_weight(s, g, in, dw, db);
}

void axpy(std::size_t n, double a, const double* x, double* y) { scalar::axpy(n, a, x, y); }

void relu_forward(std::size_t n, const double* x, double* y) { scalar::relu_forward(n, x, y); }

void relu_backward(std::size_t n, const double* x, const double* g, double* dx) {
  scalar::relu_backward(n, x, g, dx);
}

}  // namespace nodemr::kernels
