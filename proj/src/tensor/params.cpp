#include "nodemr/tensor/params.hpp"

namespace nodemr {

void ParamSet::add(std::string name, Tensor tensor) {
  if (find(name) >= 0) throw ContractError("duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(tensor)});
}

int ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return int(i);
  }
  return -1;
}

const Tensor& ParamSet::at(std::string_view name) const {
  const int i = find(name);
  if (i < 0) throw ContractError("no parameter named '" + std::string(name) + "'");
  return entries_[std::size_t(i)].tensor;
}

std::int64_t ParamSet::count() const {
  std::int64_t n = 0;
  for (const NamedTensor& e : entries_) n += e.tensor.numel();
  return n;
}

std::vector<Var> ParamSet::bind(Tape& tape, bool requires_grad) const {
  std::vector<Var> vars;
  vars.reserve(entries_.size());
  for (const NamedTensor& e : entries_) vars.push_back(tape.leaf(e.tensor, requires_grad));
  return vars;
}

ParamSet ParamSet::to(DType dtype) const {
  ParamSet out;
  for (const NamedTensor& e : entries_) out.entries_.push_back({e.name, e.tensor.to(dtype)});
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const NamedTensor& e : entries_) out.entries_.push_back({e.name, Tensor::zeros_like(e.tensor)});
  return out;
}

}  // namespace nodemr
