#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nodemr/train/model.hpp"

namespace nodemr::train {

/// A small f64 problem: one size x size random complex image, an AF 4 mask,
/// its measurements, and a fixed random projection defining the smooth loss
/// L(recon) = sum(recon * proj).
struct CheckProblem {
  Batch batch;
  Tensor projection;
};

CheckProblem make_check_problem(std::int64_t size, std::uint64_t seed);

/// Adds uniform(-scale, scale) noise to every parameter. Fresh inits have
/// zero biases, which puts ReLU units fed only by dead units exactly on their
/// kink where finite differences are one-sided; a generic point avoids that.
void perturb_parameters(Model& model, std::uint64_t seed, double scale);

struct FamilyGradCheck {
  double max_relative_error = 0.0;
  std::int64_t coordinates = 0;
  std::string worst;  // "<param>[<flat index>]"
};

/// Compares `model`'s analytic parameter gradients on `problem` with central
/// differences at up to `per_tensor` coordinates of every tensor, chosen from
/// `seed`. Relative error is |a - n| / max(|a|, 1e-6 max|a|), the smaller of
/// the errors at eps 1e-6 and 1e-7 (the second is only tried if the first
/// exceeds 1e-4).
/// The model must hold f64 parameters.
FamilyGradCheck check_gradients(const Model& model, const CheckProblem& problem, std::uint64_t seed,
                                int per_tensor = 4);

struct AdjointGap {
  int n_steps = 0;
  double gap = 0.0;  // |g_fa - g_ft| / |g_ft| over all parameter gradients
};

/// FA versus FT parameter gradients of one f64 dynamics net for each step count.
std::vector<AdjointGap> adjoint_gaps(solvers::TableauKind tableau, std::span<const int> n_steps,
                                     const CheckProblem& problem, std::uint64_t seed, int width = 8);

}  // namespace nodemr::train
