#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "nodemr/error.hpp"

namespace nodemr {

/// Element type. Models train in f32; f64 exists so finite-difference oracles
/// and convergence studies are not swamped by single-precision rounding.
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

std::string_view to_string(DType dtype);
std::size_t element_size(DType dtype);

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. Copies share storage; writers go through
/// mutable_data(), which detaches shared storage first, so a Tensor behaves
/// as an immutable value once handed to another owner.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, DType dtype = DType::f32);
  Tensor(Shape shape, std::vector<float> values);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape, DType dtype = DType::f32) { return Tensor(std::move(shape), dtype); }
  static Tensor full(Shape shape, double value, DType dtype = DType::f32);
  static Tensor scalar(double value, DType dtype = DType::f32) { return full({}, value, dtype); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape(), other.dtype()); }

  const Shape& shape() const { return shape_; }
  int rank() const { return int(shape_.size()); }
  /// Extent of `axis`; negative axes count from the end.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return numel_; }
  DType dtype() const { return dtype_; }
  std::size_t nbytes() const { return std::size_t(numel_) * element_size(dtype_); }

  template <class T>
  std::span<const T> data() const {
    check_type<T>();
    const auto& v = std::get<std::vector<T>>(*storage_);
    return {v.data(), v.size()};
  }

  template <class T>
  std::span<T> mutable_data() {
    check_type<T>();
    detach();
    auto& v = std::get<std::vector<T>>(*storage_);
    return {v.data(), v.size()};
  }

  /// Value of a one-element tensor.
  double item() const;
  /// Element `flat` (row-major) converted to double.
  double at(std::int64_t flat) const;
  void set(std::int64_t flat, double value);

  Tensor to(DType dtype) const;
  /// Same storage, new extents with equal element count.
  Tensor reshape(Shape shape) const;
  Tensor clone() const;

 private:
  using Storage = std::variant<std::vector<float>, std::vector<double>>;

  template <class T>
  void check_type() const {
    constexpr DType want = std::is_same_v<T, float> ? DType::f32 : DType::f64;
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    if (dtype_ != want) {
      throw ContractError("tensor holds " + std::string(to_string(dtype_)) + ", accessed as " +
                          std::string(to_string(want)));
    }
  }
  void detach();

  Shape shape_;
  std::int64_t numel_ = 0;
  DType dtype_ = DType::f32;
  std::shared_ptr<Storage> storage_;
};

/// Calls `fn.template operator()<T>()` with T matching `dtype`.
template <class F>
decltype(auto) visit_dtype(DType dtype, F&& fn) {
  if (dtype == DType::f64) return fn.template operator()<double>();
  return fn.template operator()<float>();
}

bool all_finite(const Tensor& t);
bool bit_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& t);
/// ||a - b|| / max(||b||, tiny).
double relative_l2(const Tensor& a, const Tensor& b);

}  // namespace nodemr
