#include "nodemr/tensor/gradcheck.hpp"

#include <cmath>

namespace nodemr {

double finite_diff_at(const ScalarFn& fn, const Tensor& input, std::int64_t index, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_diff: eps must be positive");
  Tensor probe = input.clone();
  const double x = input.at(index);
  probe.set(index, x + eps);
  const double plus = fn(probe);
  probe.set(index, x - eps);
  const double minus = fn(probe);
  return (plus - minus) / (2.0 * eps);
}

Tensor finite_diff_grad(const ScalarFn& fn, const Tensor& input, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_diff: eps must be positive");
  Tensor grad(input.shape(), DType::f64);
  Tensor probe = input.clone();
  for (std::int64_t i = 0; i < input.numel(); ++i) {
    const double x = input.at(i);
    probe.set(i, x + eps);
    const double plus = fn(probe);
    probe.set(i, x - eps);
    const double minus = fn(probe);
    probe.set(i, x);
    grad.set(i, (plus - minus) / (2.0 * eps));
  }
  return grad;
}

GradComparison compare_gradients(const Tensor& analytic, const Tensor& numeric, double floor) {
  if (analytic.numel() != numeric.numel()) {
    throw DimensionError("compare_gradients: " + shape_string(analytic.shape()) + " vs " +
                         shape_string(numeric.shape()));
  }
  GradComparison c;
  for (std::int64_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic.at(i);
    if (std::abs(a) <= floor) continue;
    const double rel = std::abs(a - numeric.at(i)) / std::abs(a);
    ++c.checked;
    if (c.worst_index < 0 || rel > c.max_relative_error) {
      c.max_relative_error = rel;
      c.worst_index = i;
    }
  }
  return c;
}

}  // namespace nodemr
