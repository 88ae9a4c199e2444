#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nodemr/mri/types.hpp"
#include "nodemr/tensor/params.hpp"

namespace nodemr::learned {

constexpr int kBlockLayers = 5;
constexpr int kAttentionLayers = 4;

/// Stage i (1-based) of an s-stage step network reads x, F_1..F_{i-1} and the
/// measurement image: 2i + 2 channels. Its dilation is s - i + 1.
int stage_in_channels(int stage);
int stage_dilation(int stage, int stages);

/// Layout of the flat parameter list:
///   lt.stage<i>.layer<j>.weight|bias|wt|bt   i = 1..s, j = 1..5
///   lt.attn.layer<j>.weight|bias             j = 1..4, 3x3, 2s -> w -> w -> w -> w
///   lt.attn.stage<i>.weight|bias             1x1 head, w -> 1 logit map
/// The attention entries are absent when s = 1.
struct Layout {
  int stages = 1;
  int width = 32;

  std::size_t block_size() const;
  std::size_t block_offset(int stage) const;  // stage is 1-based
  std::size_t trunk_offset() const;
  std::size_t head_offset(int stage) const;
  std::size_t total() const;
};

ParamSet init_learned(int stages, std::uint64_t seed, int width = 32, DType dtype = DType::f32);

/// Infers the layout from parameter names and shapes; throws ConfigError when
/// the set is not a learned-solver archive.
Layout infer_layout(const ParamSet& params);

/// F_i = G_i(x, F_1..F_{i-1}, t, y). `block` holds the stage's 20 tensors.
Var g_block_forward(const Var& x, std::span<const Var> priors, double t, const Var& y_img, std::span<const Var> block,
                    int stage, int stages);

/// Pixelwise softmax over per-stage logits, then sum_i w_i F_i. With one stage
/// the result is F_1 and `attention` may be empty. `attention` holds the trunk
/// tensors followed by the heads.
Var attention_combine(std::span<const Var> stages, std::span<const Var> attention);

/// The attention weight maps [B,s,H,W] for inspection.
Var attention_weights(std::span<const Var> stages, std::span<const Var> attention);

/// x_n + G(F_1..F_s).
Var learned_step(const Var& x, double t, const Var& y_img, std::span<const Var> params, const Layout& layout);

struct CascadeOptions {
  int iterations = 5;
  bool dc_every_step = true;  // false: a single DC after the last step
  bool checkpoint_steps = false;
};

/// x <- zero-filled image; for n < N: x <- DC(learned_step(x, n/N)).
/// `zero_filled` is [B,2,H,W] and doubles as y_img; `measured` is the
/// matching k-space with one mask or one per batch entry.
Var cascade_forward(const Var& zero_filled, const Tensor& measured, std::span<const mri::Mask> masks,
                    std::span<const Var> params, const Layout& layout, const CascadeOptions& opts);

}  // namespace nodemr::learned
