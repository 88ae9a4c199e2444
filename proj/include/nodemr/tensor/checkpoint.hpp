#pragma once

#include <functional>
#include <span>

#include "nodemr/tensor/tape.hpp"

namespace nodemr {

/// A pure function of its inputs, recorded onto whichever tape it is given.
/// Parameters the segment uses must be passed in as inputs, not captured.
using Segment = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

/// Runs `segment` on a private tape, keeps only its output, and records one
/// node on the inputs' tape. Backward replays the segment on a fresh private
/// tape and backpropagates through the replay. The output equals
/// segment(inputs) exactly; gradients match the uncheckpointed ones up to
/// summation order.
///
/// Segments with hidden state (RNG draws, mutable captures) are unsupported:
/// the replay would diverge from the recorded forward pass.
Var checkpoint(const Segment& segment, std::span<const Var> inputs);

}  // namespace nodemr
