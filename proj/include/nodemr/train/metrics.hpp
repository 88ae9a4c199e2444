#pragma once

#include <limits>

#include "nodemr/mri/types.hpp"
#include "nodemr/tensor/tape.hpp"

namespace nodemr::train {

/// PSNR of a perfect reconstruction.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

constexpr int kSsimWindow = 7;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

/// |z| per pixel: [..., 2, H, W] -> [..., H, W].
Tensor magnitude(const Tensor& planes);

/// 10 log10(max|truth|^2 / MSE(|pred|, |truth|)). Returns kPsnrIdentical when
/// the magnitudes agree exactly; ContractError when truth is all zero.
double psnr(const mri::ComplexImage& pred, const mri::ComplexImage& truth);

/// Magnitude SSIM, 7x7 uniform window over valid positions, sample
/// (N - 1) covariance normalization, dynamic range max|truth|.
double ssim(const mri::ComplexImage& pred, const mri::ComplexImage& truth);

/// SSIM of two real [H,W] images with an explicit dynamic range.
double ssim_real(const Tensor& a, const Tensor& b, double range);

/// Tape ops. `pred` is [B,2,H,W]; `truth` is a constant of the same shape.
/// Every quantity is averaged over the batch, and each sample's SSIM range
/// comes from its own truth.
Var magnitude(const Var& planes);
Var l1_magnitude(const Var& pred, const Tensor& truth);
Var ssim_magnitude(const Var& pred, const Tensor& truth);

/// L1(|pred|, |truth|) + 0.5 (1 - SSIM(pred, truth)); zero iff the
/// magnitudes match.
Var recon_loss(const Var& pred, const Tensor& truth);

}  // namespace nodemr::train
