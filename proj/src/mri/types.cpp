#include "nodemr/mri/types.hpp"

#include <algorithm>
#include <cstring>

namespace nodemr::mri {
namespace {

void require_planes(const Tensor& t, const char* what) {
  if (t.rank() != 3 || t.dim(0) != 2) {
    throw DimensionError(std::string(what) + " must be [2,H,W], got " + shape_string(t.shape()));
  }
}

template <class Item>
Tensor stack_planes(std::span<const Item> items) {
  if (items.empty()) throw ContractError("stack: no images");
  const Tensor& first = items[0].planes;
  Shape shape{std::int64_t(items.size())};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape, first.dtype());
  visit_dtype(first.dtype(), [&]<class T>() {
    T* dst = out.mutable_data<T>().data();
    for (const Item& item : items) {
      if (item.planes.shape() != first.shape() || item.planes.dtype() != first.dtype()) {
        throw DimensionError("stack: " + shape_string(item.planes.shape()) + " vs " + shape_string(first.shape()));
      }
      auto src = item.planes.template data<T>();
      dst = std::copy(src.begin(), src.end(), dst);
    }
  });
  return out;
}

}  // namespace

ComplexImage::ComplexImage(Tensor p) : planes(std::move(p)) { require_planes(planes, "ComplexImage"); }

ComplexImage ComplexImage::zeros(std::int64_t height, std::int64_t width, DType dtype) {
  return ComplexImage(Tensor({2, height, width}, dtype));
}

KSpace::KSpace(Tensor p) : planes(std::move(p)) { require_planes(planes, "KSpace"); }

std::int64_t Mask::sampled() const { return std::count(columns.begin(), columns.end(), std::uint8_t(1)); }

Mask Mask::full(std::int64_t width) {
  Mask m;
  m.columns.assign(std::size_t(width), 1);
  return m;
}

Mask Mask::none(std::int64_t width) {
  Mask m;
  m.columns.assign(std::size_t(width), 0);
  return m;
}

Tensor Mask::to_tensor() const {
  Tensor t({width()});
  auto d = t.mutable_data<float>();
  for (std::size_t i = 0; i < columns.size(); ++i) d[i] = columns[i] ? 1.0f : 0.0f;
  return t;
}

Mask Mask::from_tensor(const Tensor& t, int af) {
  if (t.rank() != 1) throw DimensionError("mask tensor must be [W], got " + shape_string(t.shape()));
  Mask m;
  m.af = af;
  m.columns.resize(std::size_t(t.numel()));
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    const double v = t.at(i);
    if (v != 0.0 && v != 1.0) throw IoError("mask entries must be 0 or 1");
    m.columns[std::size_t(i)] = v != 0.0;
  }
  return m;
}

Tensor stack(std::span<const ComplexImage> images) { return stack_planes(images); }
Tensor stack(std::span<const KSpace> kspaces) { return stack_planes(kspaces); }

ComplexImage unstack(const Tensor& batch, std::int64_t index) {
  if (batch.rank() != 4 || batch.dim(1) != 2) {
    throw DimensionError("unstack: expected [B,2,H,W], got " + shape_string(batch.shape()));
  }
  if (index < 0 || index >= batch.dim(0)) throw ContractError("unstack: index out of range");
  const std::int64_t n = 2 * batch.dim(2) * batch.dim(3);
  Tensor out({2, batch.dim(2), batch.dim(3)}, batch.dtype());
  visit_dtype(batch.dtype(), [&]<class T>() {
    auto src = batch.data<T>().subspan(std::size_t(index * n), std::size_t(n));
    std::copy(src.begin(), src.end(), out.mutable_data<T>().begin());
  });
  return ComplexImage(std::move(out));
}

}  // namespace nodemr::mri
