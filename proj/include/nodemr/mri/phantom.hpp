#pragma once

#include <cstdint>

#include "nodemr/mri/types.hpp"

namespace nodemr::mri {

/// Synthetic complex test object: 5-12 random filled ellipses with
/// intensities in [0.1, 1] summed on a zero background, magnitude scaled to a
/// maximum of 1, times exp(i phi) where phi is a random quadratic polynomial in
/// the normalized coordinates rescaled into [-pi/4, pi/4]. Deterministic per seed.
ComplexImage make_phantom(std::int64_t size, std::uint64_t seed, DType dtype = DType::f32);

}  // namespace nodemr::mri
