#include "nodemr/dynamics/dynamics.hpp"

#include "nodemr/tensor/ops.hpp"

namespace nodemr::dynamics {

ParamSet init_dynamics(std::uint64_t seed, int width, DType dtype) {
  const int channels[] = {4, width, width, width, width, 2};
  return init_time_conv_stack("dyn", channels, seed, dtype);
}

Var dynamics_forward(const Var& x, double t, const Var& y_img, std::span<const Var> params) {
  if (params.size() != std::size_t(kDynamicsLayers * kTensorsPerLayer)) {
    throw ContractError("dynamics_forward: expected " + std::to_string(kDynamicsLayers * kTensorsPerLayer) +
                        " parameter tensors, got " + std::to_string(params.size()));
  }
  if (x.value().rank() != 4 || x.shape()[1] != 2) {
    throw DimensionError("dynamics_forward: x must be [B,2,H,W], got " + shape_string(x.shape()));
  }
  if (y_img.shape() != x.shape()) {
    throw DimensionError("dynamics_forward: y_img " + shape_string(y_img.shape()) + " vs x " +
                         shape_string(x.shape()));
  }
  return time_conv_stack(ops::concat_channels(x, y_img), t, params, 1);
}

}  // namespace nodemr::dynamics
