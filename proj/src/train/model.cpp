#include "nodemr/train/model.hpp"

#include <cmath>

#include "nodemr/dynamics/dynamics.hpp"
#include "nodemr/learned/learned.hpp"
#include "nodemr/mri/operators.hpp"
#include "nodemr/train/metrics.hpp"

namespace nodemr::train {
namespace {

using solvers::TableauKind;

constexpr const char* kMetaPrefix = "meta.";

solvers::Field dynamics_field(std::size_t n_params) {
  // context = {dynamics params..., y_img}
  return [n_params](const Var& x, double t, std::span<const Var> ctx) {
    return dynamics::dynamics_forward(x, t, ctx[n_params], ctx.first(n_params));
  };
}

solvers::SolverConfig solver_config(const Family& f, const ModelOptions& o) {
  solvers::SolverConfig cfg;
  cfg.kind = f.tableau;
  cfg.n_steps = o.n_steps;
  return cfg;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::ft: return "ft";
    case Method::fa: return "fa";
    case Method::lt: return "lt";
  }
  return "?";
}

ParamSet init_params(const Family& family, int width, std::uint64_t seed, DType dtype) {
  if (family.method == Method::lt) return learned::init_learned(learned_stages(family.tableau), seed, width, dtype);
  return dynamics::init_dynamics(seed, width, dtype);
}

int infer_width(const Family& family, const ParamSet& params) {
  const char* first = family.method == Method::lt ? "lt.stage1.layer1.weight" : "dyn.layer1.weight";
  const int idx = params.find(first);
  if (idx < 0) throw ConfigError(family.name() + " archive lacks '" + first + "'");
  return int(params[std::size_t(idx)].tensor.dim(0));
}

// Parameters must match a fresh init of the same family and width name for
// name and shape, in order.
void check_layout(const Family& family, const ParamSet& params) {
  const ParamSet want = init_params(family, infer_width(family, params), 0, DType::f32);
  if (want.size() != params.size()) {
    throw ConfigError(family.name() + " expects " + std::to_string(want.size()) + " parameter tensors, archive holds " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != params[i].name || want[i].tensor.shape() != params[i].tensor.shape()) {
      throw ConfigError(family.name() + " parameter " + std::to_string(i) + ": expected '" + want[i].name + "' " +
                        shape_string(want[i].tensor.shape()) + ", found '" + params[i].name + "' " +
                        shape_string(params[i].tensor.shape()));
    }
  }
}

Tensor meta_scalar(double v) { return Tensor::scalar(v, DType::f64); }

double meta_value(const ParamSet& archive, const std::string& key) {
  const int idx = archive.find(kMetaPrefix + key);
  if (idx < 0) throw ConfigError("archive lacks '" + std::string(kMetaPrefix) + key + "'");
  const Tensor& t = archive[std::size_t(idx)].tensor;
  if (t.numel() != 1) throw ConfigError("archive entry 'meta." + key + "' is not a scalar");
  return t.item();
}

int meta_int(const ParamSet& archive, const std::string& key) {
  const double v = meta_value(archive, key);
  if (!(std::floor(v) == v) || std::abs(v) > 1e9) throw ConfigError("archive entry 'meta." + key + "' is not an integer");
  return int(v);
}

}  // namespace

std::string Family::name() const { return method_name(method) + "_" + std::string(solvers::to_string(tableau)); }

std::vector<Family> all_families() {
  std::vector<Family> out;
  for (Method m : {Method::ft, Method::fa, Method::lt})
    for (TableauKind k : {TableauKind::euler, TableauKind::rk2, TableauKind::rk4}) out.push_back({m, k});
  return out;
}

Family parse_family(std::string_view name) {
  for (const Family& f : all_families())
    if (f.name() == name) return f;
  std::string options;
  for (const Family& f : all_families()) options += (options.empty() ? "" : ", ") + f.name();
  throw ConfigError("unknown model family '" + std::string(name) + "'; valid options: " + options);
}

int learned_stages(TableauKind tableau) {
  switch (tableau) {
    case TableauKind::euler: return 1;
    case TableauKind::rk2: return 2;
    case TableauKind::rk4: return 4;
  }
  return 1;
}

void ModelOptions::validate() const {
  if (width < 1) throw ConfigError("width must be at least 1, got " + std::to_string(width));
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1, got " + std::to_string(n_steps));
  if (cascades < 1) throw ConfigError("cascades must be at least 1, got " + std::to_string(cascades));
}

Batch make_batch(std::span<const mri::Sample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("make_batch: no samples");
  std::vector<mri::ComplexImage> truth, zf;
  std::vector<mri::KSpace> ksp;
  Batch b;
  for (std::size_t i : indices) {
    if (i >= samples.size()) throw ContractError("make_batch: index " + std::to_string(i) + " out of range");
    const mri::Sample& s = samples[i];
    truth.push_back(s.image);
    ksp.push_back(s.kspace);
    zf.push_back(mri::zero_filled(s.kspace, s.mask));
    b.masks.push_back(s.mask);
    b.ids.push_back(s.entry.id);
  }
  b.truth = mri::stack(truth);
  b.kspace = mri::stack(ksp);
  b.zero_filled = mri::stack(zf);
  return b;
}

Batch make_batch(std::span<const mri::Sample> samples) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(samples, idx);
}

Model::Model(Family family, ModelOptions options, ParamSet params)
    : family_(family), options_(options), params_(std::move(params)) {
  options_.validate();
  check_layout(family_, params_);
  options_.width = infer_width(family_, params_);
}

Model Model::init(Family family, ModelOptions options, std::uint64_t seed, DType dtype) {
  options.validate();
  return Model(family, options, init_params(family, options.width, seed, dtype));
}

ParamSet Model::to_archive() const {
  ParamSet out = params_;
  const std::vector<Family> all = all_families();
  double code = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i] == family_) code = double(i);
  out.add("meta.family", meta_scalar(code));
  out.add("meta.n_steps", meta_scalar(options_.n_steps));
  out.add("meta.cascades", meta_scalar(options_.cascades));
  out.add("meta.dc_every_step", meta_scalar(options_.dc_every_step ? 1 : 0));
  return out;
}

Model Model::from_archive(const ParamSet& archive) {
  const std::vector<Family> all = all_families();
  const int code = meta_int(archive, "family");
  if (code < 0 || code >= int(all.size())) throw ConfigError("archive names unknown family code " + std::to_string(code));
  ModelOptions o;
  o.n_steps = meta_int(archive, "n_steps");
  o.cascades = meta_int(archive, "cascades");
  o.dc_every_step = meta_int(archive, "dc_every_step") != 0;
  ParamSet params;
  for (const NamedTensor& e : archive.entries())
    if (e.name.rfind(kMetaPrefix, 0) != 0) params.add(e.name, e.tensor);
  const Family family = all[std::size_t(code)];
  o.width = infer_width(family, params);
  return Model(family, o, std::move(params));
}

Var Model::forward(std::span<const Var> params, const Batch& batch) const {
  if (params.size() != params_.size()) {
    throw ContractError("Model::forward: " + std::to_string(params.size()) + " parameter vars for " +
                        std::to_string(params_.size()) + " tensors");
  }
  Tape& tape = params[0].tape();
  const Var zf = tape.constant(batch.zero_filled);
  if (family_.method == Method::lt) {
    const learned::Layout layout = learned::infer_layout(params_);
    learned::CascadeOptions co;
    co.iterations = options_.cascades;
    co.dc_every_step = options_.dc_every_step;
    co.checkpoint_steps = options_.checkpointing;
    return learned::cascade_forward(zf, batch.kspace, batch.masks, params, layout, co);
  }
  std::vector<Var> context(params.begin(), params.end());
  context.push_back(zf);
  solvers::IntegrateOptions io;
  io.checkpoint_steps = options_.checkpointing;
  const Var x1 = solvers::integrate(dynamics_field(params.size()), zf, solver_config(family_, options_), context, io);
  return mri::dc_layer(x1, batch.kspace, batch.masks);
}

Tensor Model::reconstruct(const Batch& batch) const {
  Tape tape;
  return forward(params_.bind(tape, false), batch).value();
}

LossGrad Model::loss_and_grad(const Batch& batch, const ReconLoss& loss) const {
  LossGrad out;
  if (family_.method != Method::fa) {
    Tape tape;
    const std::vector<Var> vars = params_.bind(tape);
    const Var l = loss(forward(vars, batch));
    out.loss = l.value().item();
    tape.backward(l);
    for (const Var& v : vars) out.grads.push_back(tape.grad(v));
    return out;
  }
  std::vector<Tensor> context;
  for (const NamedTensor& e : params_.entries()) context.push_back(e.tensor);
  context.push_back(batch.zero_filled);
  const solvers::Field f = dynamics_field(params_.size());
  const solvers::SolverConfig cfg = solver_config(family_, options_);
  const Tensor x1 = solvers::integrate_values(f, batch.zero_filled, cfg, context);
  Tensor a1;
  {
    Tape tape;
    const Var x = tape.leaf(x1);
    const Var l = loss(mri::dc_layer(x, batch.kspace, batch.masks));
    out.loss = l.value().item();
    tape.backward(l);
    a1 = tape.grad(x);
  }
  solvers::Gradients g = solvers::adjoint_grad(f, x1, cfg, context, a1);
  g.context.resize(params_.size());  // drop dL/dy_img
  out.grads = std::move(g.context);
  return out;
}

LossGrad Model::loss_and_grad(const Batch& batch) const {
  const Tensor truth = batch.truth.dtype() == params_[0].tensor.dtype() ? batch.truth
                                                                         : batch.truth.to(params_[0].tensor.dtype());
  return loss_and_grad(batch, [&truth](const Var& recon) { return recon_loss(recon, truth); });
}

}  // namespace nodemr::train
