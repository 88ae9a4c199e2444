#include "nodemr/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace nodemr {

std::string_view to_string(DType dtype) { return dtype == DType::f64 ? "f64" : "f32"; }

std::size_t element_size(DType dtype) { return dtype == DType::f64 ? 8 : 4; }

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_string(shape));
    n *= e;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{0}) {}

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), numel_(shape_numel(shape_)), dtype_(dtype) {
  if (dtype == DType::f64) {
    storage_ = std::make_shared<Storage>(std::vector<double>(std::size_t(numel_), 0.0));
  } else {
    storage_ = std::make_shared<Storage>(std::vector<float>(std::size_t(numel_), 0.0f));
  }
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)), dtype_(DType::f32) {
  if (std::int64_t(values.size()) != numel_) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " + std::to_string(numel_) + " values, got " +
                         std::to_string(values.size()));
  }
  storage_ = std::make_shared<Storage>(std::move(values));
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)), dtype_(DType::f64) {
  if (std::int64_t(values.size()) != numel_) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " + std::to_string(numel_) + " values, got " +
                         std::to_string(values.size()));
  }
  storage_ = std::make_shared<Storage>(std::move(values));
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  visit_dtype(dtype, [&]<class T>() {
    auto d = t.mutable_data<T>();
    std::fill(d.begin(), d.end(), T(value));
  });
  return t;
}

std::int64_t Tensor::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[std::size_t(a)];
}

double Tensor::item() const {
  if (numel_ != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return at(0);
}

double Tensor::at(std::int64_t flat) const {
  return visit_dtype(dtype_, [&]<class T>() { return double(data<T>()[std::size_t(flat)]); });
}

void Tensor::set(std::int64_t flat, double value) {
  visit_dtype(dtype_, [&]<class T>() { mutable_data<T>()[std::size_t(flat)] = T(value); });
}

Tensor Tensor::to(DType dtype) const {
  if (dtype == dtype_) return *this;
  Tensor out(shape_, dtype);
  visit_dtype(dtype_, [&]<class S>() {
    visit_dtype(dtype, [&]<class D>() {
      auto src = data<S>();
      auto dst = out.mutable_data<D>();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = D(src[i]);
    });
  });
  return out;
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel_) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::clone() const {
  Tensor t = *this;
  t.detach();
  return t;
}

void Tensor::detach() {
  if (storage_.use_count() > 1) storage_ = std::make_shared<Storage>(*storage_);
}

bool all_finite(const Tensor& t) {
  return visit_dtype(t.dtype(), [&]<class T>() {
    return std::all_of(t.data<T>().begin(), t.data<T>().end(), [](T v) { return std::isfinite(v); });
  });
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return visit_dtype(a.dtype(), [&]<class T>() {
    return std::memcmp(a.data<T>().data(), b.data<T>().data(), a.nbytes()) == 0;
  });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw DimensionError("max_abs_diff of " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

double l2_norm(const Tensor& t) {
  return visit_dtype(t.dtype(), [&]<class T>() {
    double s = 0.0;
    for (T v : t.data<T>()) s += double(v) * double(v);
    return std::sqrt(s);
  });
}

double relative_l2(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw DimensionError("relative_l2 of " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  double num = 0.0, den = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = a.at(i) - b.at(i);
    num += d * d;
    den += b.at(i) * b.at(i);
  }
  return std::sqrt(num) / std::max(std::sqrt(den), std::numeric_limits<double>::min());
}

}  // namespace nodemr
