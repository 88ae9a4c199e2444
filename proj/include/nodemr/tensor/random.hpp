#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "nodemr/tensor/tensor.hpp"

namespace nodemr {

/// Derived seed for a named sub-stream: splitmix64 finalizer applied to
/// seed ^ fnv1a(label) ^ (index * golden ratio). Fixed forever so datasets and
/// training runs stay reproducible from one top-level seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

/// mt19937_64 stream with distributions written out by hand: the standard
/// library's distributions are implementation-defined, the engine is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller; one draw pair per call.
  double normal();

  Tensor uniform_tensor(Shape shape, double lo, double hi, DType dtype = DType::f32);
  Tensor normal_tensor(Shape shape, double stddev, DType dtype = DType::f32);

 private:
  std::mt19937_64 engine_;
};

}  // namespace nodemr
