#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "nodemr/tensor/tensor.hpp"

namespace nodemr {

using ScalarFn = std::function<double(const Tensor&)>;

/// Central differences (fn(x + eps e_i) - fn(x - eps e_i)) / (2 eps) for
/// every element i. Perturbations happen in the input's dtype.
Tensor finite_diff_grad(const ScalarFn& fn, const Tensor& input, double eps);

/// The same quotient for a single flat index.
double finite_diff_at(const ScalarFn& fn, const Tensor& input, std::int64_t index, double eps);

struct GradComparison {
  double max_relative_error = 0.0;
  std::int64_t checked = 0;  // coordinates with |analytic| above the floor
  std::int64_t worst_index = -1;
};

/// Relative error |a - n| / |a| over coordinates where |a| > floor.
GradComparison compare_gradients(const Tensor& analytic, const Tensor& numeric, double floor = 1e-4);

}  // namespace nodemr
