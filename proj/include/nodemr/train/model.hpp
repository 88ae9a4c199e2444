#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nodemr/mri/dataset.hpp"
#include "nodemr/solvers/solvers.hpp"
#include "nodemr/tensor/params.hpp"

namespace nodemr::train {

/// How a model is trained: fixed solver with backpropagation through the
/// solver (ft), fixed solver with adjoint gradients (fa), or learned solver (lt).
enum class Method { ft, fa, lt };

struct Family {
  Method method = Method::ft;
  solvers::TableauKind tableau = solvers::TableauKind::euler;

  std::string name() const;  // "ft_euler", "lt_rk4", ...
  bool operator==(const Family&) const = default;
};

/// ConfigError listing the nine valid names otherwise.
Family parse_family(std::string_view name);
std::vector<Family> all_families();

/// Stage count of a learned solver shaped like `tableau`: 1, 2 or 4.
int learned_stages(solvers::TableauKind tableau);

struct ModelOptions {
  int width = 32;
  int n_steps = 5;           // ft / fa solver steps over [0, 1]
  int cascades = 5;          // lt cascade iterations
  bool dc_every_step = true; // lt only; false applies DC once at the end
  bool checkpointing = false;

  void validate() const;
};

/// One minibatch as [B,2,H,W] tensors plus one mask per entry.
struct Batch {
  Tensor truth;
  Tensor kspace;
  Tensor zero_filled;
  std::vector<mri::Mask> masks;
  std::vector<std::string> ids;

  std::int64_t size() const { return truth.dim(0); }
};

Batch make_batch(std::span<const mri::Sample> samples, std::span<const std::size_t> indices);
Batch make_batch(std::span<const mri::Sample> samples);

/// Maps the final reconstruction (on the tape) to a scalar loss.
using ReconLoss = std::function<Var(const Var& recon)>;

struct LossGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;  // one per parameter tensor
};

class Model {
 public:
  Model(Family family, ModelOptions options, ParamSet params);

  /// Fresh parameters: dynamics net for ft / fa, stage blocks plus attention for lt.
  static Model init(Family family, ModelOptions options, std::uint64_t seed, DType dtype = DType::f32);

  /// Rebuilds a model from an archive written by to_archive(). Throws
  /// ConfigError when the metadata or tensors do not describe a valid model.
  static Model from_archive(const ParamSet& archive);

  const Family& family() const { return family_; }
  const ModelOptions& options() const { return options_; }
  ModelOptions& options() { return options_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }
  std::size_t parameter_count() const { return params_.count(); }

  /// Parameters plus meta.* scalars recording the family and step counts.
  ParamSet to_archive() const;

  /// Records the reconstruction of `batch` on the tape of `params`.
  Var forward(std::span<const Var> params, const Batch& batch) const;

  /// Value-only reconstruction [B,2,H,W].
  Tensor reconstruct(const Batch& batch) const;

  /// Loss and parameter gradients. ft and lt backpropagate through the
  /// recorded forward pass; fa integrates forward without a tape and obtains
  /// parameter gradients from the adjoint sweep.
  LossGrad loss_and_grad(const Batch& batch, const ReconLoss& loss) const;

  /// loss_and_grad with the reconstruction loss against batch.truth.
  LossGrad loss_and_grad(const Batch& batch) const;

 private:
  Family family_;
  ModelOptions options_;
  ParamSet params_;
};

}  // namespace nodemr::train
