#include "nodemr/train/check.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "nodemr/mri/operators.hpp"
#include "nodemr/tensor/gradcheck.hpp"
#include "nodemr/tensor/ops.hpp"
#include "nodemr/tensor/random.hpp"

namespace nodemr::train {
namespace {

// A ReLU kink closer than eps to the point spoils only the larger step; a real
// gradient error shows at both.
constexpr double kEps[] = {1e-6, 1e-7};

ReconLoss projection_loss(const Tensor& proj) {
  return [proj](const Var& recon) { return ops::sum(ops::mul(recon, recon.tape().constant(proj))); };
}

double loss_value(const Model& model, const ParamSet& params, const CheckProblem& p) {
  Tape tape;
  return projection_loss(p.projection)(model.forward(params.bind(tape, false), p.batch)).value().item();
}

std::vector<std::int64_t> pick(std::int64_t numel, int k, Rng& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(numel));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  if (numel <= k) return idx;
  for (int i = 0; i < k; ++i) std::swap(idx[std::size_t(i)], idx[std::size_t(rng.uniform_int(i, numel - 1))]);
  idx.resize(std::size_t(k));
  return idx;
}

}  // namespace

CheckProblem make_check_problem(std::int64_t size, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "check"));
  const mri::ComplexImage truth(rng.uniform_tensor({2, size, size}, -1.0, 1.0, DType::f64));
  const mri::Mask mask = mri::make_mask(size, 4, mri::default_center_fraction(4), derive_seed(seed, "mask"));
  const mri::KSpace k = mri::forward_E(truth, mask);
  const mri::ComplexImage zf = mri::zero_filled(k, mask);
  CheckProblem p;
  p.batch.truth = truth.planes.reshape({1, 2, size, size});
  p.batch.kspace = k.planes.reshape({1, 2, size, size});
  p.batch.zero_filled = zf.planes.reshape({1, 2, size, size});
  p.batch.masks = {mask};
  p.batch.ids = {"check"};
  p.projection = rng.uniform_tensor({1, 2, size, size}, -1.0, 1.0, DType::f64);
  return p;
}

void perturb_parameters(Model& model, std::uint64_t seed, double scale) {
  Rng rng(derive_seed(seed, "perturb"));
  for (std::size_t t = 0; t < model.params().size(); ++t) {
    Tensor& w = model.params()[t].tensor;
    for (std::int64_t i = 0; i < w.numel(); ++i) w.set(i, w.at(i) + rng.uniform(-scale, scale));
  }
}

FamilyGradCheck check_gradients(const Model& model, const CheckProblem& problem, std::uint64_t seed, int per_tensor) {
  if (model.params()[0].tensor.dtype() != DType::f64) throw ContractError("check_gradients: model must be f64");
  const LossGrad analytic = model.loss_and_grad(problem.batch, projection_loss(problem.projection));
  double scale = 0.0;
  for (const Tensor& g : analytic.grads)
    for (std::int64_t i = 0; i < g.numel(); ++i) scale = std::max(scale, std::abs(g.at(i)));
  const double floor = std::max(1e-6 * scale, 1e-300);

  FamilyGradCheck out;
  Rng rng(derive_seed(seed, "coords"));
  for (std::size_t t = 0; t < model.params().size(); ++t) {
    const NamedTensor& entry = model.params()[t];
    for (std::int64_t i : pick(entry.tensor.numel(), per_tensor, rng)) {
      const double a = analytic.grads[t].at(i);
      double rel = std::numeric_limits<double>::infinity();
      for (double eps : kEps) {
        const double numeric = finite_diff_at(
            [&](const Tensor& probe) {
              ParamSet p = model.params();
              p[t].tensor = probe;
              return loss_value(model, p, problem);
            },
            entry.tensor, i, eps);
        rel = std::min(rel, std::abs(a - numeric) / std::max(std::abs(a), floor));
        if (rel < 1e-4) break;
      }
      ++out.coordinates;
      if (out.worst.empty() || rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = entry.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

std::vector<AdjointGap> adjoint_gaps(solvers::TableauKind tableau, std::span<const int> n_steps,
                                     const CheckProblem& problem, std::uint64_t seed, int width) {
  std::vector<AdjointGap> out;
  for (int n : n_steps) {
    ModelOptions o;
    o.width = width;
    o.n_steps = n;
    const Model ft = Model::init({Method::ft, tableau}, o, seed, DType::f64);
    const Model fa(Family{Method::fa, tableau}, o, ft.params());
    const LossGrad gt = ft.loss_and_grad(problem.batch, projection_loss(problem.projection));
    const LossGrad ga = fa.loss_and_grad(problem.batch, projection_loss(problem.projection));
    double diff = 0.0, ref = 0.0;
    for (std::size_t t = 0; t < gt.grads.size(); ++t)
      for (std::int64_t i = 0; i < gt.grads[t].numel(); ++i) {
        const double d = ga.grads[t].at(i) - gt.grads[t].at(i);
        diff += d * d;
        ref += gt.grads[t].at(i) * gt.grads[t].at(i);
      }
    out.push_back({n, std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300)});
  }
  return out;
}

}  // namespace nodemr::train
