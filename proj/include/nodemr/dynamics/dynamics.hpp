#pragma once

#include <cstdint>
#include <span>

#include "nodemr/dynamics/time_conv.hpp"

namespace nodemr::dynamics {

constexpr int kDynamicsLayers = 5;
constexpr int kDefaultWidth = 32;

/// Velocity field f(x, t, y) for the fixed-solver models: the 2-channel
/// estimate and the 2-channel zero-filled measurement image are concatenated
/// and passed through five time-dependent conv layers 4 -> w -> w -> w -> w -> 2.
/// Archive names `dyn.layer{1..5}.weight|bias|wt|bt`.
ParamSet init_dynamics(std::uint64_t seed, int width = kDefaultWidth, DType dtype = DType::f32);

/// `params` are the bound dynamics parameters in archive order.
Var dynamics_forward(const Var& x, double t, const Var& y_img, std::span<const Var> params);

}  // namespace nodemr::dynamics
