#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nodemr/tensor/tape.hpp"

namespace nodemr {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered named parameter tensors. Models address their parameters by
/// position; names exist for archives and diagnostics.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<NamedTensor> entries) : entries_(std::move(entries)) {}

  void add(std::string name, Tensor tensor);

  std::size_t size() const { return entries_.size(); }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const std::vector<NamedTensor>& entries() const& { return entries_; }
  std::vector<NamedTensor> entries() && { return std::move(entries_); }  // safe in range-for over a temporary

  /// Index of `name`, or -1.
  int find(std::string_view name) const;
  const Tensor& at(std::string_view name) const;

  /// Total scalar count.
  std::int64_t count() const;

  /// Leaves on `tape`, in order.
  std::vector<Var> bind(Tape& tape, bool requires_grad = true) const;

  ParamSet to(DType dtype) const;
  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;

 private:
  std::vector<NamedTensor> entries_;
};

}  // namespace nodemr
