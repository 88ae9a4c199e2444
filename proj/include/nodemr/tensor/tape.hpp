#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "nodemr/tensor/tensor.hpp"

namespace nodemr {

class Tape;

/// Handle to a value recorded on a Tape. Only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  DType dtype() const { return value().dtype(); }
  bool requires_grad() const;
  Tape& tape() const;
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Bytes of recorded (non-leaf) values held by live tapes on this thread.
struct ActivationStats {
  std::size_t live = 0;
  std::size_t peak = 0;
};

ActivationStats activation_stats();
/// Sets the peak to the current live count.
void reset_activation_peak();

/// Reverse-mode recording. Nodes are appended in evaluation order, so the
/// vector order is a topological order and backward() is a reverse sweep.
/// Single-threaded: one tape per training step.
class Tape {
 public:
  /// Pointers to the gradient buffers of a node's inputs, null for inputs
  /// that need no gradient. Backward rules must accumulate (+=) into them.
  using GradSlots = std::span<Tensor* const>;
  using BackwardFn = std::function<void(const Tensor& grad_out, GradSlots input_grads)>;

  Tape() = default;
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an operation output. The backward rule is kept only when some
  /// input requires a gradient.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  /// Gradients of the scalar `loss` with respect to every requires_grad leaf.
  void backward(const Var& loss);
  /// Vector-Jacobian product: backpropagates `seed` (shaped like `output`).
  void backward(const Var& output, const Tensor& seed);

  /// Gradient from the last backward(); zeros if `v` was not reached.
  Tensor grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }
  std::size_t activation_bytes() const { return activation_bytes_; }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool leaf = false;
  };

  const Node& node(const Var& v) const;

  std::deque<Node> nodes_;  // deque: value() references stay valid as the tape grows
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
  std::size_t activation_bytes_ = 0;
};

}  // namespace nodemr
