#pragma once

#include <span>
#include <vector>

#include "nodemr/mri/fft.hpp"
#include "nodemr/tensor/tape.hpp"

namespace nodemr::mri {

/// Default center fraction per acceleration: 0.08 for AF 4, 0.04 for AF 8,
/// and 0.32 / af otherwise.
double default_center_fraction(int af);

/// round(width * center_fraction) contiguous columns centered on width / 2 are
/// always sampled; every other column independently with the probability that
/// makes the expected total width / af. Throws ConfigError when the center
/// alone exceeds width / af.
Mask make_mask(std::int64_t width, int af, double center_fraction, std::uint64_t seed);

/// E x = M F x.
KSpace forward_E(const ComplexImage& image, const Mask& mask);
/// E^H k = F^H M k.
ComplexImage adjoint_E(const KSpace& kspace, const Mask& mask);

/// F^H((1 - M) F x + M y): sampled k-space entries are replaced by measurements.
ComplexImage data_consistency(const ComplexImage& recon, const KSpace& measured, const Mask& mask);

/// E^H y, the initial condition x(t0).
ComplexImage zero_filled(const KSpace& measured, const Mask& mask);

/// ||E x - y||_2
double data_fidelity(const ComplexImage& image, const KSpace& measured, const Mask& mask);

struct ClassicalConfig {
  double eta = 0.5;
  double lambda = 0.0;
  int iterations = 10;
};

/// Gradient descent on ||E x - y||^2 / 2 + lambda ||x||^2 from the zero-filled
/// start. When `fidelity_trace` is given it receives ||E x - y|| before the
/// first and after every iteration.
ComplexImage classical_recon(const KSpace& measured, const Mask& mask, const ClassicalConfig& cfg,
                             std::vector<double>* fidelity_trace = nullptr);

/// Batched data consistency on the tape. `recon` is [B,2,H,W]; `measured` is
/// the [B,2,H,W] k-space; `masks` holds one mask or one per batch entry. The
/// gradient with respect to `recon` is F^H (1 - M) F g. Measurements are data
/// and receive no gradient.
Var dc_layer(const Var& recon, const Tensor& measured, std::span<const Mask> masks);

}  // namespace nodemr::mri
