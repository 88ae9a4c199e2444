#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "nodemr/solvers/solvers.hpp"

namespace nodemr::solvers {

/// Scalar test problems on [0, 1] with x(0) = 1 and closed-form x(1).
enum class BenchOde {
  exp_decay,  // dx/dt = -x, x(1) = e^-1
  zero,       // dx/dt = 0, x(1) = 1
};

std::string_view to_string(BenchOde ode);
/// ConfigError listing the options otherwise.
BenchOde parse_bench_ode(std::string_view name);

struct BenchRow {
  BenchOde ode = BenchOde::exp_decay;
  TableauKind kind = TableauKind::euler;
  int n_steps = 0;
  double error = 0.0;  // |x_n(1) - x(1)|, f64
  /// Error ratio against the previous row of the same tableau, rescaled to a
  /// doubling of n: (e_prev / e)^(ln 2 / ln(n / n_prev)). NaN on the first row
  /// or when either error is zero.
  double halving_ratio = 0.0;
};

/// Every tableau at every step count, in tableau-major order. Step counts
/// must be positive and strictly increasing.
std::vector<BenchRow> solver_bench(BenchOde ode, std::span<const int> steps);

struct RatioBand {
  double lo = 0.0;
  double hi = 0.0;
};

/// Accepted error-halving ratios: order 1, 2 and 4 give 2, 4 and 16.
RatioBand halving_band(TableauKind kind);

/// True when every defined halving ratio lies inside its tableau's band.
bool within_bands(std::span<const BenchRow> rows);

}  // namespace nodemr::solvers
