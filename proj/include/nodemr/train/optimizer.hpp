#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "nodemr/tensor/params.hpp"

namespace nodemr::train {

enum class OptimizerKind { adam, radam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::radam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool lookahead = true;
  int lookahead_k = 5;
  double lookahead_alpha = 0.5;

  void validate() const;
};

/// Adam with optional variance rectification (RAdam) wrapped in optional
/// Lookahead. Moments and slow weights are kept in double precision and the
/// parameters are written back in their own dtype.
class Optimizer {
 public:
  Optimizer(const ParamSet& params, OptimizerConfig cfg);

  /// One update. Throws NumericError naming the first parameter with a
  /// non-finite gradient; nothing is modified in that case.
  void step(ParamSet& params, std::span<const Tensor> grads);

  long steps() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_, slow_;
};

}  // namespace nodemr::train
