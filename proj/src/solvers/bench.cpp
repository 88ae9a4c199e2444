#include "nodemr/solvers/bench.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nodemr/tensor/ops.hpp"

namespace nodemr::solvers {

std::string_view to_string(BenchOde ode) { return ode == BenchOde::exp_decay ? "exp_decay" : "zero"; }

BenchOde parse_bench_ode(std::string_view name) {
  if (name == "exp_decay") return BenchOde::exp_decay;
  if (name == "zero") return BenchOde::zero;
  throw ConfigError("unknown ode '" + std::string(name) + "'; valid: exp_decay, zero");
}

std::vector<BenchRow> solver_bench(BenchOde ode, std::span<const int> steps) {
  if (steps.empty()) throw ConfigError("solver_bench: step list is empty");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < 1 || (i > 0 && steps[i] <= steps[i - 1])) {
      throw ConfigError("solver_bench: step counts must be positive and strictly increasing");
    }
  }
  const double rate = ode == BenchOde::exp_decay ? -1.0 : 0.0;
  const Field f = [rate](const Var& x, double, std::span<const Var>) { return ops::scale(x, rate); };
  const double exact = std::exp(rate);
  const Tensor x0 = Tensor::full({1}, 1.0, DType::f64);

  std::vector<BenchRow> rows;
  for (TableauKind kind : {TableauKind::euler, TableauKind::rk2, TableauKind::rk4}) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
      BenchRow r{ode, kind, steps[i], 0.0, std::numeric_limits<double>::quiet_NaN()};
      r.error = std::abs(integrate_values(f, x0, {kind, steps[i]}, {}).at(0) - exact);
      if (i > 0) {
        const double prev = rows.back().error;
        if (prev > 0.0 && r.error > 0.0) {
          r.halving_ratio = std::pow(prev / r.error, std::log(2.0) / std::log(double(steps[i]) / steps[i - 1]));
        }
      }
      rows.push_back(r);
    }
  }
  return rows;
}

RatioBand halving_band(TableauKind kind) {
  switch (kind) {
    case TableauKind::euler: return {1.7, 2.3};
    case TableauKind::rk2: return {3.4, 4.6};
    case TableauKind::rk4: return {13.0, 19.0};
  }
  return {};
}

bool within_bands(std::span<const BenchRow> rows) {
  for (const BenchRow& r : rows) {
    if (std::isnan(r.halving_ratio)) continue;
    const RatioBand b = halving_band(r.kind);
    if (r.halving_ratio < b.lo || r.halving_ratio > b.hi) return false;
  }
  return true;
}

}  // namespace nodemr::solvers
