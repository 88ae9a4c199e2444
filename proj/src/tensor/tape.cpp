#include "nodemr/tensor/tape.hpp"

#include <algorithm>

namespace nodemr {
namespace {

thread_local ActivationStats g_stats;

void add_live(std::size_t bytes) {
  g_stats.live += bytes;
  g_stats.peak = std::max(g_stats.peak, g_stats.live);
}

}  // namespace

ActivationStats activation_stats() { return g_stats; }

void reset_activation_peak() { g_stats.peak = g_stats.live; }

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->node(*this).value;
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->node(*this).requires_grad; }

Tape& Var::tape() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return *tape_;
}

Tape::~Tape() { g_stats.live -= std::min(g_stats.live, activation_bytes_); }

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.id_ < 0 || std::size_t(v.id_) >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
  return nodes_[std::size_t(v.id_)];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, int(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    node(in);  // validates ownership
    n.inputs.push_back(in.id_);
    n.requires_grad = n.requires_grad || nodes_[std::size_t(in.id_)].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  const std::size_t bytes = n.value.nbytes();
  activation_bytes_ += bytes;
  add_live(bytes);
  nodes_.push_back(std::move(n));
  return Var(this, int(nodes_.size()) - 1);
}

void Tape::backward(const Var& loss) {
  const Node& n = node(loss);
  if (n.value.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(n.value.shape()));
  }
  backward(loss, Tensor::full(n.value.shape(), 1.0, n.value.dtype()));
}

void Tape::backward(const Var& output, const Tensor& seed) {
  const Node& out = node(output);
  if (seed.shape() != out.value.shape() || seed.dtype() != out.value.dtype()) {
    throw DimensionError("backward seed " + shape_string(seed.shape()) + " does not match output " +
                         shape_string(out.value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor(Shape{0}));
  has_grad_.assign(nodes_.size(), false);
  grads_[std::size_t(output.id_)] = seed.clone();
  has_grad_[std::size_t(output.id_)] = true;

  std::vector<Tensor*> slots;
  for (int i = output.id_; i >= 0; --i) {
    const std::size_t idx = std::size_t(i);
    Node& nd = nodes_[idx];
    if (!has_grad_[idx] || !nd.backward) continue;
    slots.assign(nd.inputs.size(), nullptr);
    for (std::size_t j = 0; j < nd.inputs.size(); ++j) {
      const std::size_t in = std::size_t(nd.inputs[j]);
      if (!nodes_[in].requires_grad) continue;
      if (!has_grad_[in]) {
        grads_[in] = Tensor::zeros_like(nodes_[in].value);
        has_grad_[in] = true;
      }
      slots[j] = &grads_[in];
    }
    nd.backward(grads_[idx], slots);
    // Interior gradients are dead once propagated.
    if (!nd.leaf) {
      grads_[idx] = Tensor(Shape{0});
      has_grad_[idx] = false;
    }
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = node(v);
  const std::size_t idx = std::size_t(v.id_);
  if (idx < has_grad_.size() && has_grad_[idx]) return grads_[idx];
  return Tensor::zeros_like(n.value);
}

}  // namespace nodemr
