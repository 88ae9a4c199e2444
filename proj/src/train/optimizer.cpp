#include "nodemr/train/optimizer.hpp"

#include <cmath>
#include <string>

namespace nodemr::train {
namespace {

std::vector<double> to_doubles(const Tensor& t) {
  std::vector<double> out(std::size_t(t.numel()));
  visit_dtype(t.dtype(), [&]<class T>() {
    const auto d = t.data<T>();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = double(d[i]);
  });
  return out;
}

void store(Tensor& t, const std::vector<double>& values) {
  visit_dtype(t.dtype(), [&]<class T>() {
    auto d = t.mutable_data<T>();
    for (std::size_t i = 0; i < values.size(); ++i) d[i] = T(values[i]);
  });
}

}  // namespace

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "radam"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "radam") return OptimizerKind::radam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'; valid options: adam, radam");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative, got " + std::to_string(learning_rate));
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (lookahead_k < 1) throw ConfigError("lookahead_k must be at least 1, got " + std::to_string(lookahead_k));
  if (!(lookahead_alpha > 0.0 && lookahead_alpha <= 1.0)) {
    throw ConfigError("lookahead_alpha must lie in (0, 1], got " + std::to_string(lookahead_alpha));
  }
}

Optimizer::Optimizer(const ParamSet& params, OptimizerConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  for (const NamedTensor& e : params.entries()) {
    m_.emplace_back(std::size_t(e.tensor.numel()), 0.0);
    v_.emplace_back(std::size_t(e.tensor.numel()), 0.0);
    if (cfg_.lookahead) slow_.push_back(to_doubles(e.tensor));
  }
}

void Optimizer::step(ParamSet& params, std::span<const Tensor> grads) {
  if (grads.size() != params.size() || params.size() != m_.size()) {
    throw ContractError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters (state holds " + std::to_string(m_.size()) + ")");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].numel() != params[i].tensor.numel()) {
      throw DimensionError("optimizer: gradient " + shape_string(grads[i].shape()) + " for parameter '" +
                           params[i].name + "' " + shape_string(params[i].tensor.shape()));
    }
    if (!all_finite(grads[i])) throw NumericError("non-finite gradient for parameter '" + params[i].name + "'");
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2, t = double(t_);
  const double bc1 = 1.0 - std::pow(b1, t), bc2 = 1.0 - std::pow(b2, t);
  // Rectification term; rho_t <= 5 falls back to bias-corrected momentum SGD.
  bool adaptive = true;
  double rect = 1.0;
  if (cfg_.kind == OptimizerKind::radam) {
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * std::pow(b2, t) / bc2;
    adaptive = rho_t > 5.0;
    if (adaptive) {
      rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    }
  }
  const bool sync = cfg_.lookahead && t_ % cfg_.lookahead_k == 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double> w = to_doubles(params[i].tensor);
    const std::vector<double> g = to_doubles(grads[i]);
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      if (adaptive) {
        w[j] -= cfg_.learning_rate * rect * mhat / (std::sqrt(v[j] / bc2) + cfg_.epsilon);
      } else {
        w[j] -= cfg_.learning_rate * mhat;
      }
    }
    if (sync) {
      auto& slow = slow_[i];
      const double a = cfg_.lookahead_alpha;
      for (std::size_t j = 0; j < w.size(); ++j) {
        slow[j] = (1.0 - a) * slow[j] + a * w[j];  // a = 1 lands exactly on the fast weights
        w[j] = slow[j];
      }
    }
    store(params[i].tensor, w);
  }
}

}  // namespace nodemr::train
