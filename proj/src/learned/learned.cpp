#include "nodemr/learned/learned.hpp"

#include <cmath>

#include "nodemr/dynamics/time_conv.hpp"
#include "nodemr/mri/operators.hpp"
#include "nodemr/tensor/checkpoint.hpp"
#include "nodemr/tensor/ops.hpp"
#include "nodemr/tensor/random.hpp"

namespace nodemr::learned {
namespace {

using dynamics::kTensorsPerLayer;

constexpr std::size_t kTrunkTensors = 2 * kAttentionLayers;
constexpr std::size_t kHeadTensors = 2;

std::string stage_prefix(int i) { return "lt.stage" + std::to_string(i); }

// Segment-safe: every tensor the step reads arrives through `in`.
Var cascade_step(std::span<const Var> in, double t, const Tensor& measured, std::span<const mri::Mask> masks,
                 const Layout& layout, bool apply_dc) {
  Var x = learned_step(in[0], t, in[1], in.subspan(2), layout);
  return apply_dc ? mri::dc_layer(x, measured, masks) : x;
}

}  // namespace

int stage_in_channels(int stage) { return 2 * stage + 2; }
int stage_dilation(int stage, int stages) { return stages - stage + 1; }

std::size_t Layout::block_size() const { return std::size_t(kBlockLayers * kTensorsPerLayer); }
std::size_t Layout::block_offset(int stage) const { return std::size_t(stage - 1) * block_size(); }
std::size_t Layout::trunk_offset() const { return std::size_t(stages) * block_size(); }
std::size_t Layout::head_offset(int stage) const {
  return trunk_offset() + kTrunkTensors + std::size_t(stage - 1) * kHeadTensors;
}
std::size_t Layout::total() const {
  return stages == 1 ? trunk_offset() : trunk_offset() + kTrunkTensors + std::size_t(stages) * kHeadTensors;
}

ParamSet init_learned(int stages, std::uint64_t seed, int width, DType dtype) {
  if (stages != 1 && stages != 2 && stages != 4) {
    throw ConfigError("learned solver stage count must be 1, 2 or 4, got " + std::to_string(stages));
  }
  ParamSet p;
  for (int i = 1; i <= stages; ++i) {
    const int ch[] = {stage_in_channels(i), width, width, width, width, 2};
    const ParamSet block = dynamics::init_time_conv_stack(stage_prefix(i), ch, seed, dtype);
    for (const auto& e : block.entries()) p.add(e.name, e.tensor);
  }
  if (stages == 1) return p;
  Rng rng(derive_seed(seed, "lt.attn"));
  for (int j = 1; j <= kAttentionLayers; ++j) {
    const int cin = j == 1 ? 2 * stages : width;
    const double bound = std::sqrt(6.0 / double(cin * 9));
    const std::string name = "lt.attn.layer" + std::to_string(j);
    p.add(name + ".weight", rng.uniform_tensor({width, cin, 3, 3}, -bound, bound, dtype));
    p.add(name + ".bias", Tensor({width}, dtype));
  }
  const double head_bound = std::sqrt(6.0 / double(width));
  for (int i = 1; i <= stages; ++i) {
    const std::string name = "lt.attn.stage" + std::to_string(i);
    p.add(name + ".weight", rng.uniform_tensor({1, width, 1, 1}, -head_bound, head_bound, dtype));
    p.add(name + ".bias", Tensor({1}, dtype));
  }
  return p;
}

Layout infer_layout(const ParamSet& params) {
  Layout l;
  l.stages = 0;
  while (params.find(stage_prefix(l.stages + 1) + ".layer1.weight") >= 0) ++l.stages;
  if (l.stages == 0) throw ConfigError("archive holds no learned-solver stages (lt.stage1.*)");
  if (l.stages != 1 && l.stages != 2 && l.stages != 4) {
    throw ConfigError("archive holds " + std::to_string(l.stages) + " stages; expected 1, 2 or 4");
  }
  l.width = int(params.at(stage_prefix(1) + ".layer1.weight").dim(0));
  if (params.size() < l.total()) throw ConfigError("learned-solver archive is missing tensors");
  for (int i = 1; i <= l.stages; ++i) {
    const std::size_t off = l.block_offset(i);
    if (params[off].name != stage_prefix(i) + ".layer1.weight") {
      throw ConfigError("learned-solver archive entries are out of order at '" + params[off].name + "'");
    }
    const auto ch = dynamics::stack_channels(std::span(params.entries()).subspan(off, l.block_size()));
    if (ch.front() != stage_in_channels(i) || ch.back() != 2) {
      throw ConfigError(stage_prefix(i) + " has channel plan " + std::to_string(ch.front()) + " -> " +
                        std::to_string(ch.back()) + ", expected " + std::to_string(stage_in_channels(i)) + " -> 2");
    }
  }
  if (l.stages > 1 && params[l.trunk_offset()].name != "lt.attn.layer1.weight") {
    throw ConfigError("learned-solver archive lacks the attention module");
  }
  return l;
}

Var g_block_forward(const Var& x, std::span<const Var> priors, double t, const Var& y_img, std::span<const Var> block,
                    int stage, int stages) {
  if (int(priors.size()) != stage - 1) {
    throw ContractError("g_block_forward: stage " + std::to_string(stage) + " needs " + std::to_string(stage - 1) +
                        " prior stage outputs, got " + std::to_string(priors.size()));
  }
  std::vector<Var> parts{x};
  parts.insert(parts.end(), priors.begin(), priors.end());
  parts.push_back(y_img);
  return dynamics::time_conv_stack(ops::concat_channels(parts), t, block, stage_dilation(stage, stages));
}

Var attention_weights(std::span<const Var> stages, std::span<const Var> attention) {
  const std::size_t s = stages.size();
  if (attention.size() != kTrunkTensors + s * kHeadTensors) {
    throw ContractError("attention: expected " + std::to_string(kTrunkTensors + s * kHeadTensors) +
                        " tensors for " + std::to_string(s) + " stages, got " + std::to_string(attention.size()));
  }
  Var h = ops::concat_channels(stages);
  for (std::size_t j = 0; j < std::size_t(kAttentionLayers); ++j) {
    h = ops::relu(ops::conv2d(h, attention[2 * j], attention[2 * j + 1], 1));
  }
  std::vector<Var> logits;
  for (std::size_t i = 0; i < s; ++i) {
    logits.push_back(ops::conv2d(h, attention[kTrunkTensors + 2 * i], attention[kTrunkTensors + 2 * i + 1], 1));
  }
  return ops::softmax_channels(ops::concat_channels(logits));
}

Var attention_combine(std::span<const Var> stages, std::span<const Var> attention) {
  if (stages.empty()) throw ContractError("attention_combine: no stages");
  if (stages.size() == 1) return stages[0];
  return ops::weighted_stage_sum(attention_weights(stages, attention), stages);
}

Var learned_step(const Var& x, double t, const Var& y_img, std::span<const Var> params, const Layout& layout) {
  if (params.size() != layout.total()) {
    throw ContractError("learned_step: expected " + std::to_string(layout.total()) + " parameter tensors, got " +
                        std::to_string(params.size()));
  }
  std::vector<Var> F;
  for (int i = 1; i <= layout.stages; ++i) {
    try {
      F.push_back(g_block_forward(x, F, t, y_img, params.subspan(layout.block_offset(i), layout.block_size()), i,
                                  layout.stages));
    } catch (const NumericError& e) {
      throw NumericError("stage " + std::to_string(i) + ": " + e.what());
    } catch (const DimensionError& e) {
      throw DimensionError("stage " + std::to_string(i) + ": " + e.what());
    }
  }
  const auto attention = layout.stages == 1 ? std::span<const Var>{} : params.subspan(layout.trunk_offset());
  const Var parts[] = {x, attention_combine(F, attention)};
  return ops::linear_combination(parts, std::vector<double>{1.0, 1.0});
}

Var cascade_forward(const Var& zero_filled, const Tensor& measured, std::span<const mri::Mask> masks,
                    std::span<const Var> params, const Layout& layout, const CascadeOptions& opts) {
  if (opts.iterations < 1) throw ConfigError("cascade iterations must be at least 1");
  const double limit = 1e6 * std::max(l2_norm(zero_filled.value()), 1.0);
  Var x = zero_filled;
  for (int n = 0; n < opts.iterations; ++n) {
    const double t = double(n) / opts.iterations;
    const bool dc = opts.dc_every_step || n + 1 == opts.iterations;
    std::vector<Var> in{x, zero_filled};
    in.insert(in.end(), params.begin(), params.end());
    if (opts.checkpoint_steps) {
      std::vector<mri::Mask> kept(masks.begin(), masks.end());
      Segment seg = [t, measured, kept, layout, dc](Tape&, std::span<const Var> v) {
        return cascade_step(v, t, measured, kept, layout, dc);
      };
      x = checkpoint(seg, in);
    } else {
      x = cascade_step(in, t, measured, masks, layout, dc);
    }
    const double norm = l2_norm(x.value());
    if (!std::isfinite(norm) || norm > limit) {
      throw NumericError("cascade diverged at iteration " + std::to_string(n + 1) + " (|x| = " +
                         std::to_string(norm) + ")");
    }
  }
  return x;
}

}  // namespace nodemr::learned
