#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nodemr/tensor/params.hpp"

namespace nodemr::dynamics {

/// One time-dependent convolution: tau = wt * t + bt is broadcast to a
/// constant channel appended after the feature channels, then a same-size
/// 3x3 convolution. Parameter order: weight [Cout, Cin+1, 3, 3], bias [Cout],
/// wt [1], bt [1].
constexpr int kTensorsPerLayer = 4;
constexpr int kKernel = 3;

Var time_dep_conv(const Var& input, double t, std::span<const Var> layer, int dilation);

/// `channels` = {in, hidden..., out}: channels.size() - 1 layers, ReLU between
/// layers and none after the last. `params` holds kTensorsPerLayer entries per
/// layer in layer order.
Var time_conv_stack(const Var& input, double t, std::span<const Var> params, int dilation);

/// Kaiming-uniform weights with bound sqrt(6 / fan_in), fan_in counting the
/// time channel; zero biases; wt = 1, bt = 0. Names are
/// `<prefix>.layer<j>.weight|bias|wt|bt` with j from 1.
ParamSet init_time_conv_stack(const std::string& prefix, std::span<const int> channels, std::uint64_t seed,
                              DType dtype = DType::f32);

/// Channel plan recovered from a stack's weights; throws DimensionError when
/// consecutive layers do not chain.
std::vector<int> stack_channels(std::span<const NamedTensor> params);

}  // namespace nodemr::dynamics
