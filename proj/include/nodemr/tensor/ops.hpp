#pragma once

#include <span>
#include <vector>

#include "nodemr/tensor/tape.hpp"

// Differentiable operations. Inputs must share a tape and a dtype. Apart from
// bias-add and scalar multiples, shapes must match exactly.

namespace nodemr::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double c);

/// sum_i coeffs[i] * terms[i]; one node instead of a chain of adds.
Var linear_combination(std::span<const Var> terms, std::span<const double> coeffs);

/// Sum of all elements, rank-0 result.
Var sum(const Var& a);
Var mean(const Var& a);

/// max(0, x); the subgradient at 0 is 0.
Var relu(const Var& a);

/// [B,C1,H,W] ++ [B,C2,H,W] -> [B,C1+C2,H,W]. Zero-channel parts are allowed.
Var concat_channels(std::span<const Var> parts);
Var concat_channels(const Var& a, const Var& b);

/// Channels [begin, end) of a [B,C,H,W] tensor.
Var slice_channels(const Var& a, int begin, int end);

/// Same-size dilated cross-correlation: x [B,Cin,H,W], weight [Cout,Cin,k,k]
/// (k odd), bias [Cout]; zero padding of (k-1)*dilation/2 per side.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int dilation);

/// [B,1,H,W] filled with scale * t + offset, where scale and offset are
/// one-element parameters.
Var time_channel(const Var& scale, const Var& offset, double t, std::int64_t batch, std::int64_t height,
                 std::int64_t width);

/// Softmax across axis 1 of a [B,S,H,W] tensor, independently per pixel.
Var softmax_channels(const Var& logits);

/// sum_i weights[:, i] * stages[i], where weights is [B,S,H,W] and each stage
/// is [B,C,H,W]; the weight map broadcasts over C.
Var weighted_stage_sum(const Var& weights, std::span<const Var> stages);

}  // namespace nodemr::ops
