#pragma once

#include <span>

#include "nodemr/mri/types.hpp"

// Centered orthonormal 2D DFT over the last two axes of [..., 2, H, W]
// tensors. "Centered" means ifftshift before and fftshift after the
// transform, so the zero frequency sits at index (H/2, W/2). Orthonormal
// scaling (1/sqrt(HW) both ways) makes the inverse the adjoint.

namespace nodemr::mri {

Tensor fft2c(const Tensor& planes);
Tensor ifft2c(const Tensor& planes);

/// Zeroes unsampled columns. `masks` holds one mask shared by every image, or
/// one per leading batch index.
Tensor apply_mask(const Tensor& planes, std::span<const Mask> masks);

/// Keeps unsampled columns and zeroes sampled ones: (1 - M) k.
Tensor apply_complement(const Tensor& planes, std::span<const Mask> masks);

}  // namespace nodemr::mri
