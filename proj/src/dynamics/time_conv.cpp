#include "nodemr/dynamics/time_conv.hpp"

#include <cmath>

#include "nodemr/tensor/ops.hpp"
#include "nodemr/tensor/random.hpp"

namespace nodemr::dynamics {

Var time_dep_conv(const Var& input, double t, std::span<const Var> layer, int dilation) {
  if (layer.size() != kTensorsPerLayer) throw ContractError("time_dep_conv: expected weight, bias, wt, bt");
  if (input.value().rank() != 4) {
    throw DimensionError("time_dep_conv: input must be [B,C,H,W], got " + shape_string(input.shape()));
  }
  const Shape& s = input.shape();
  Var tau = ops::time_channel(layer[2], layer[3], t, s[0], s[2], s[3]);
  return ops::conv2d(ops::concat_channels(input, tau), layer[0], layer[1], dilation);
}

Var time_conv_stack(const Var& input, double t, std::span<const Var> params, int dilation) {
  if (params.empty() || params.size() % kTensorsPerLayer != 0) {
    throw ContractError("time_conv_stack: parameter count " + std::to_string(params.size()) +
                        " is not a positive multiple of " + std::to_string(kTensorsPerLayer));
  }
  const std::size_t layers = params.size() / kTensorsPerLayer;
  Var h = input;
  for (std::size_t l = 0; l < layers; ++l) {
    h = time_dep_conv(h, t, params.subspan(l * kTensorsPerLayer, kTensorsPerLayer), dilation);
    if (l + 1 < layers) h = ops::relu(h);
  }
  return h;
}

ParamSet init_time_conv_stack(const std::string& prefix, std::span<const int> channels, std::uint64_t seed,
                              DType dtype) {
  if (channels.size() < 2) throw ContractError("init_time_conv_stack: need at least input and output channels");
  ParamSet p;
  Rng rng(derive_seed(seed, prefix));
  for (std::size_t l = 0; l + 1 < channels.size(); ++l) {
    const int cin = channels[l] + 1, cout = channels[l + 1];
    const double bound = std::sqrt(6.0 / double(cin * kKernel * kKernel));
    const std::string name = prefix + ".layer" + std::to_string(l + 1);
    p.add(name + ".weight", rng.uniform_tensor({cout, cin, kKernel, kKernel}, -bound, bound, dtype));
    p.add(name + ".bias", Tensor({cout}, dtype));
    p.add(name + ".wt", Tensor::full({1}, 1.0, dtype));
    p.add(name + ".bt", Tensor({1}, dtype));
  }
  return p;
}

std::vector<int> stack_channels(std::span<const NamedTensor> params) {
  if (params.empty() || params.size() % kTensorsPerLayer != 0) {
    throw DimensionError("stack_channels: malformed layer list");
  }
  std::vector<int> channels;
  for (std::size_t l = 0; l < params.size(); l += kTensorsPerLayer) {
    const Tensor& w = params[l].tensor;
    if (w.rank() != 4 || w.dim(2) != kKernel || w.dim(3) != kKernel) {
      throw DimensionError(params[l].name + ": expected [Cout,Cin+1,3,3], got " + shape_string(w.shape()));
    }
    const int cin = int(w.dim(1)) - 1;
    if (channels.empty()) {
      channels.push_back(cin);
    } else if (channels.back() != cin) {
      throw DimensionError(params[l].name + ": takes " + std::to_string(cin) + " channels, previous layer gives " +
                           std::to_string(channels.back()));
    }
    channels.push_back(int(w.dim(0)));
  }
  return channels;
}

}  // namespace nodemr::dynamics
