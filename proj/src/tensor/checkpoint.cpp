#include "nodemr/tensor/checkpoint.hpp"

#include <vector>

namespace nodemr {
namespace {

std::vector<Var> bind_inputs(Tape& tape, const std::vector<Tensor>& values, const std::vector<bool>& grad) {
  std::vector<Var> vars;
  vars.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) vars.push_back(tape.leaf(values[i], grad[i]));
  return vars;
}

}  // namespace

Var checkpoint(const Segment& segment, std::span<const Var> inputs) {
  if (inputs.empty()) throw ContractError("checkpoint: a segment needs at least one input");
  Tape& outer = inputs[0].tape();
  std::vector<Tensor> values;
  std::vector<bool> needs_grad;
  for (const Var& v : inputs) {
    if (&v.tape() != &outer) throw ContractError("checkpoint: inputs live on different tapes");
    values.push_back(v.value());
    needs_grad.push_back(v.requires_grad());
  }

  Tensor output;
  {
    Tape inner;
    const std::vector<Var> bound = bind_inputs(inner, values, needs_grad);
    output = segment(inner, bound).value();
  }

  auto replay = [segment, values, needs_grad](const Tensor& g, Tape::GradSlots slots) {
    Tape inner;
    const std::vector<Var> bound = bind_inputs(inner, values, needs_grad);
    const Var out = segment(inner, bound);
    inner.backward(out, g);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i] == nullptr) continue;
      const Tensor gi = inner.grad(bound[i]);
      visit_dtype(gi.dtype(), [&]<class T>() {
        auto src = gi.data<T>();
        auto dst = slots[i]->mutable_data<T>();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      });
    }
  };
  return outer.record(std::move(output), inputs, std::move(replay));
}

}  // namespace nodemr
