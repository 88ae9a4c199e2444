#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nodemr/tensor/tape.hpp"

namespace nodemr::solvers {

enum class TableauKind { euler, rk2, rk4 };

std::string_view to_string(TableauKind kind);
/// Accepts "euler", "rk2", "rk4"; ConfigError lists the options otherwise.
TableauKind parse_tableau(std::string_view name);

/// Explicit Runge-Kutta coefficients. `a` are the output weights, `b` the
/// strictly lower-triangular stage couplings (b[i][j], j < i), `c` the stage
/// time offsets with c[0] = 0.
struct ButcherTableau {
  TableauKind kind = TableauKind::euler;
  int stages = 1;
  std::vector<double> a;
  std::vector<std::vector<double>> b;
  std::vector<double> c;
};

ButcherTableau tableau(TableauKind kind);

struct SolverConfig {
  TableauKind kind = TableauKind::rk4;
  int n_steps = 5;
  double t0 = 0.0;
  double t1 = 1.0;

  double h() const { return (t1 - t0) / n_steps; }
  void validate() const;
};

/// f(x, t; context) recorded onto x's tape. `context` holds every other tape
/// value f reads (parameters, measurement image), so checkpointed replays and
/// adjoint sweeps can rebind them.
using Field = std::function<Var(const Var& x, double t, std::span<const Var> context)>;

/// x + sum_i a_i F_i with F_i = h f(x + sum_{j<i} b_ij F_j, t + c_i h).
/// A non-finite stage raises NumericError naming the stage.
Var rk_step(const Field& f, const Var& x, double t, double h, const ButcherTableau& tab,
            std::span<const Var> context);

struct IntegrateOptions {
  /// Record each step as one checkpointed segment.
  bool checkpoint_steps = false;
};

/// n_steps uniform rk_steps from t0 to t1. Aborts with NumericError when |x|
/// exceeds 1e6 * max(|x0|, 1) or a step produces non-finite values.
Var integrate(const Field& f, const Var& x0, const SolverConfig& cfg, std::span<const Var> context,
              IntegrateOptions opts = {});

/// Value-only integration; each step runs on a private tape.
Tensor integrate_values(const Field& f, const Tensor& x0, const SolverConfig& cfg,
                        std::span<const Tensor> context);

struct Gradients {
  double loss = 0.0;
  Tensor x0;                    // dL/dx(t0)
  std::vector<Tensor> context;  // dL/d(context[i])
};

using LossFn = std::function<Var(const Var& x1)>;

/// Backpropagation through every solver operation (the FT path).
Gradients through_solver_grad(const Field& f, const Tensor& x0, const SolverConfig& cfg,
                              std::span<const Tensor> context, const LossFn& loss, IntegrateOptions opts = {});

/// Adjoint sensitivities (the FA path): integrates (x, a, g) from t1 back to
/// t0 with the forward tableau and step count, where da/dt = -a^T df/dx and
/// dg/dt = -a^T df/dcontext, starting from a(t1) = `loss_grad_at_t1` and
/// g(t1) = 0. `x1` is the forward solution at t1. Each stage evaluates f on
/// its own tape, so memory does not grow with n_steps. `loss` is left 0.
Gradients adjoint_grad(const Field& f, const Tensor& x1, const SolverConfig& cfg, std::span<const Tensor> context,
                       const Tensor& loss_grad_at_t1);

}  // namespace nodemr::solvers
