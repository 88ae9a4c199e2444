#include "nodemr/solvers/solvers.hpp"

#include <cmath>
#include <sstream>

#include "nodemr/kernels/kernels.hpp"
#include "nodemr/tensor/checkpoint.hpp"
#include "nodemr/tensor/ops.hpp"

namespace nodemr::solvers {
namespace {

// y += a * x
void axpy(Tensor& y, double a, const Tensor& x) {
  visit_dtype(y.dtype(), [&]<class T>() {
    kernels::axpy(std::size_t(y.numel()), T(a), x.data<T>().data(), y.mutable_data<T>().data());
  });
}

Tensor scaled(const Tensor& x, double a) {
  Tensor y = Tensor::zeros_like(x);
  axpy(y, a, x);
  return y;
}

double divergence_limit(const Tensor& x0) { return 1e6 * std::max(l2_norm(x0), 1.0); }

void check_state(const Tensor& x, double limit, int step) {
  if (!all_finite(x)) throw NumericError("integrate: step " + std::to_string(step) + " produced non-finite values");
  const double norm = l2_norm(x);
  if (norm > limit) {
    std::ostringstream msg;
    msg << "integrate: diverged at step " << step << " (|x| = " << norm << " exceeds " << limit << ")";
    throw NumericError(msg.str());
  }
}

std::vector<Var> bind(Tape& tape, std::span<const Tensor> values, bool requires_grad) {
  std::vector<Var> vars;
  vars.reserve(values.size());
  for (const Tensor& v : values) vars.push_back(tape.leaf(v, requires_grad));
  return vars;
}

}  // namespace

std::string_view to_string(TableauKind kind) {
  switch (kind) {
    case TableauKind::euler: return "euler";
    case TableauKind::rk2: return "rk2";
    case TableauKind::rk4: return "rk4";
  }
  return "?";
}

TableauKind parse_tableau(std::string_view name) {
  for (TableauKind k : {TableauKind::euler, TableauKind::rk2, TableauKind::rk4}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown solver '" + std::string(name) + "' (valid: euler, rk2, rk4)");
}

ButcherTableau tableau(TableauKind kind) {
  ButcherTableau t;
  t.kind = kind;
  switch (kind) {
    case TableauKind::euler:
      t.stages = 1;
      t.a = {1.0};
      t.b = {{}};
      t.c = {0.0};
      break;
    case TableauKind::rk2:
      t.stages = 2;
      t.a = {0.5, 0.5};
      t.b = {{}, {1.0}};
      t.c = {0.0, 1.0};
      break;
    case TableauKind::rk4:
      t.stages = 4;
      t.a = {1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0};
      t.b = {{}, {0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}};
      t.c = {0.0, 0.5, 0.5, 1.0};
      break;
  }
  return t;
}

void SolverConfig::validate() const {
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1, got " + std::to_string(n_steps));
  if (!(t1 > t0)) throw ConfigError("solver interval must satisfy t1 > t0");
}

Var rk_step(const Field& f, const Var& x, double t, double h, const ButcherTableau& tab,
            std::span<const Var> context) {
  if (!(h > 0.0)) throw ContractError("rk_step: step size must be positive");
  std::vector<Var> stages;
  stages.reserve(std::size_t(tab.stages));
  for (int i = 0; i < tab.stages; ++i) {
    std::vector<Var> terms{x};
    std::vector<double> coeffs{1.0};
    for (int j = 0; j < i; ++j) {
      if (tab.b[std::size_t(i)][std::size_t(j)] == 0.0) continue;
      terms.push_back(stages[std::size_t(j)]);
      coeffs.push_back(tab.b[std::size_t(i)][std::size_t(j)]);
    }
    const Var xi = terms.size() == 1 ? x : ops::linear_combination(terms, coeffs);
    Var Fi = ops::scale(f(xi, t + tab.c[std::size_t(i)] * h, context), h);
    if (!all_finite(Fi.value())) {
      throw NumericError("rk_step: stage " + std::to_string(i + 1) + " of " + std::string(to_string(tab.kind)) +
                         " produced non-finite values at t = " + std::to_string(t));
    }
    stages.push_back(Fi);
  }
  std::vector<Var> terms{x};
  std::vector<double> coeffs{1.0};
  for (int i = 0; i < tab.stages; ++i) {
    terms.push_back(stages[std::size_t(i)]);
    coeffs.push_back(tab.a[std::size_t(i)]);
  }
  return ops::linear_combination(terms, coeffs);
}

Var integrate(const Field& f, const Var& x0, const SolverConfig& cfg, std::span<const Var> context,
              IntegrateOptions opts) {
  cfg.validate();
  const ButcherTableau tab = tableau(cfg.kind);
  const double h = cfg.h();
  const double limit = divergence_limit(x0.value());
  Var x = x0;
  for (int n = 0; n < cfg.n_steps; ++n) {
    const double t = cfg.t0 + n * h;
    try {
      if (opts.checkpoint_steps) {
        std::vector<Var> inputs{x};
        inputs.insert(inputs.end(), context.begin(), context.end());
        Segment step = [f, t, h, tab](Tape&, std::span<const Var> in) {
          return rk_step(f, in[0], t, h, tab, in.subspan(1));
        };
        x = checkpoint(step, inputs);
      } else {
        x = rk_step(f, x, t, h, tab, context);
      }
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(n + 1) + ": " + e.what());
    }
    check_state(x.value(), limit, n + 1);
  }
  return x;
}

Tensor integrate_values(const Field& f, const Tensor& x0, const SolverConfig& cfg, std::span<const Tensor> context) {
  cfg.validate();
  const ButcherTableau tab = tableau(cfg.kind);
  const double h = cfg.h();
  const double limit = divergence_limit(x0);
  Tensor x = x0;
  for (int n = 0; n < cfg.n_steps; ++n) {
    Tape tape;
    const std::vector<Var> ctx = bind(tape, context, false);
    try {
      x = rk_step(f, tape.constant(x), cfg.t0 + n * h, h, tab, ctx).value();
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(n + 1) + ": " + e.what());
    }
    check_state(x, limit, n + 1);
  }
  return x;
}

Gradients through_solver_grad(const Field& f, const Tensor& x0, const SolverConfig& cfg,
                              std::span<const Tensor> context, const LossFn& loss, IntegrateOptions opts) {
  Tape tape;
  const Var x = tape.leaf(x0);
  const std::vector<Var> ctx = bind(tape, context, true);
  const Var L = loss(integrate(f, x, cfg, ctx, opts));
  tape.backward(L);
  Gradients g;
  g.loss = L.value().item();
  g.x0 = tape.grad(x);
  for (const Var& c : ctx) g.context.push_back(tape.grad(c));
  return g;
}

Gradients adjoint_grad(const Field& f, const Tensor& x1, const SolverConfig& cfg, std::span<const Tensor> context,
                       const Tensor& loss_grad_at_t1) {
  cfg.validate();
  if (loss_grad_at_t1.shape() != x1.shape()) {
    throw DimensionError("adjoint_grad: loss gradient " + shape_string(loss_grad_at_t1.shape()) + " vs state " +
                         shape_string(x1.shape()));
  }
  const ButcherTableau tab = tableau(cfg.kind);
  const double hb = -cfg.h();

  // Augmented state: x, a = dL/dx, g = accumulated dL/dcontext.
  struct State {
    Tensor x, a;
    std::vector<Tensor> g;
  };
  // Time derivative of the augmented state, one fresh tape per evaluation.
  auto derivative = [&](const State& z, double t) {
    Tape tape;
    const Var xv = tape.leaf(z.x);
    const std::vector<Var> ctx = bind(tape, context, true);
    const Var fx = f(xv, t, ctx);
    tape.backward(fx, z.a);
    State d{fx.value(), scaled(tape.grad(xv), -1.0), {}};
    for (const Var& c : ctx) d.g.push_back(scaled(tape.grad(c), -1.0));
    return d;
  };
  auto combine = [](const State& base, std::span<const State> ks, std::span<const double> w) {
    State out{base.x.clone(), base.a.clone(), {}};
    for (const Tensor& g : base.g) out.g.push_back(g.clone());
    for (std::size_t j = 0; j < ks.size(); ++j) {
      if (w[j] == 0.0) continue;
      axpy(out.x, w[j], ks[j].x);
      axpy(out.a, w[j], ks[j].a);
      for (std::size_t c = 0; c < out.g.size(); ++c) axpy(out.g[c], w[j], ks[j].g[c]);
    }
    return out;
  };

  State z{x1, loss_grad_at_t1, {}};
  for (const Tensor& c : context) z.g.push_back(Tensor::zeros_like(c));
  for (int n = cfg.n_steps; n > 0; --n) {
    const double t = cfg.t0 + n * cfg.h();
    std::vector<State> ks;
    for (int i = 0; i < tab.stages; ++i) {
      std::vector<double> w(tab.b[std::size_t(i)].begin(), tab.b[std::size_t(i)].end());
      const State zi = combine(z, ks, w);
      State k = derivative(zi, t + tab.c[std::size_t(i)] * hb);
      State hk{scaled(k.x, hb), scaled(k.a, hb), {}};
      for (const Tensor& g : k.g) hk.g.push_back(scaled(g, hb));
      ks.push_back(std::move(hk));
    }
    z = combine(z, ks, tab.a);
    if (!all_finite(z.a)) {
      throw NumericError("adjoint_grad: non-finite adjoint at step " + std::to_string(cfg.n_steps - n + 1) +
                         " of the backward sweep");
    }
  }
  Gradients out;
  out.x0 = z.a;
  out.context = std::move(z.g);
  return out;
}

}  // namespace nodemr::solvers
