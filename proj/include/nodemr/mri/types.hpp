#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nodemr/tensor/tensor.hpp"

namespace nodemr::mri {

/// Complex H x W grid stored as a [2,H,W] tensor (real plane, imaginary plane).
/// The same layout is the two-channel network representation, so conversion
/// to and from network tensors is a reshape.
struct ComplexImage {
  Tensor planes;

  ComplexImage() = default;
  explicit ComplexImage(Tensor p);
  static ComplexImage zeros(std::int64_t height, std::int64_t width, DType dtype = DType::f32);

  std::int64_t height() const { return planes.dim(1); }
  std::int64_t width() const { return planes.dim(2); }
  DType dtype() const { return planes.dtype(); }
};

/// Frequency-domain grid with the same layout, DC component at the center.
struct KSpace {
  Tensor planes;

  KSpace() = default;
  explicit KSpace(Tensor p);

  std::int64_t height() const { return planes.dim(1); }
  std::int64_t width() const { return planes.dim(2); }
  DType dtype() const { return planes.dtype(); }
};

/// Cartesian column (phase-encode) sampling pattern.
struct Mask {
  std::vector<std::uint8_t> columns;  // 1 = sampled
  int af = 1;
  double center_fraction = 0.0;
  std::uint64_t seed = 0;

  std::int64_t width() const { return std::int64_t(columns.size()); }
  std::int64_t sampled() const;
  bool empty_pattern() const { return sampled() == 0; }

  static Mask full(std::int64_t width);
  static Mask none(std::int64_t width);

  /// [W] tensor of 0/1 values, the on-disk form.
  Tensor to_tensor() const;
  static Mask from_tensor(const Tensor& t, int af = 1);
};

/// [B,2,H,W] from images of equal shape and dtype.
Tensor stack(std::span<const ComplexImage> images);
Tensor stack(std::span<const KSpace> kspaces);
ComplexImage unstack(const Tensor& batch, std::int64_t index);

}  // namespace nodemr::mri
