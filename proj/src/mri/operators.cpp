#include "nodemr/mri/operators.hpp"

#include <cmath>
#include <sstream>

#include "nodemr/tensor/random.hpp"

namespace nodemr::mri {
namespace {

void require_match(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  if (a.dtype() != b.dtype()) throw ContractError(std::string(op) + ": mixed dtypes");
}

// a + s * b
Tensor axpby(const Tensor& a, double s, const Tensor& b) {
  Tensor out = a.clone();
  visit_dtype(a.dtype(), [&]<class T>() {
    auto o = out.mutable_data<T>();
    auto bd = b.data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += T(s) * bd[i];
  });
  return out;
}

Tensor dc_planes(const Tensor& recon, const Tensor& measured_masked, std::span<const Mask> masks) {
  Tensor k = apply_complement(fft2c(recon), masks);
  return ifft2c(axpby(k, 1.0, measured_masked));
}

}  // namespace

double default_center_fraction(int af) {
  if (af == 4) return 0.08;
  if (af == 8) return 0.04;
  return 0.32 / af;
}

Mask make_mask(std::int64_t width, int af, double center_fraction, std::uint64_t seed) {
  if (width < 8) throw ConfigError("make_mask: width must be at least 8, got " + std::to_string(width));
  if (af < 1) throw ConfigError("make_mask: acceleration factor must be >= 1, got " + std::to_string(af));
  if (!(center_fraction > 0.0 && center_fraction < 1.0)) {
    throw ConfigError("make_mask: center_fraction must lie in (0, 1)");
  }
  const auto center = std::int64_t(std::lround(double(width) * center_fraction));
  const double target = double(width) / af;
  if (double(center) > target) {
    std::ostringstream msg;
    msg << "make_mask: " << center << " center columns exceed the " << target << " columns allowed at AF " << af;
    throw ConfigError(msg.str());
  }
  Mask m;
  m.af = af;
  m.center_fraction = center_fraction;
  m.seed = seed;
  m.columns.assign(std::size_t(width), 0);
  const std::int64_t start = width / 2 - center / 2;
  for (std::int64_t i = start; i < start + center; ++i) m.columns[std::size_t(i)] = 1;
  const double p = width > center ? (target - double(center)) / double(width - center) : 0.0;
  Rng rng(derive_seed(seed, "mask"));
  for (std::int64_t i = 0; i < width; ++i) {
    const double u = rng.uniform01();  // drawn for every column so the stream is position-stable
    if (m.columns[std::size_t(i)] == 0 && u < p) m.columns[std::size_t(i)] = 1;
  }
  return m;
}

KSpace forward_E(const ComplexImage& image, const Mask& mask) {
  return KSpace(apply_mask(fft2c(image.planes), std::span(&mask, 1)));
}

ComplexImage adjoint_E(const KSpace& kspace, const Mask& mask) {
  return ComplexImage(ifft2c(apply_mask(kspace.planes, std::span(&mask, 1))));
}

ComplexImage data_consistency(const ComplexImage& recon, const KSpace& measured, const Mask& mask) {
  require_match(recon.planes, measured.planes, "data_consistency");
  const auto masks = std::span(&mask, 1);
  return ComplexImage(dc_planes(recon.planes, apply_mask(measured.planes, masks), masks));
}

ComplexImage zero_filled(const KSpace& measured, const Mask& mask) { return adjoint_E(measured, mask); }

double data_fidelity(const ComplexImage& image, const KSpace& measured, const Mask& mask) {
  require_match(image.planes, measured.planes, "data_fidelity");
  return l2_norm(axpby(forward_E(image, mask).planes, -1.0, apply_mask(measured.planes, std::span(&mask, 1))));
}

ComplexImage classical_recon(const KSpace& measured, const Mask& mask, const ClassicalConfig& cfg,
                             std::vector<double>* fidelity_trace) {
  if (!(cfg.eta >= 0.0) || cfg.iterations < 1 || !(cfg.lambda >= 0.0)) {
    throw ConfigError("classical_recon: need eta >= 0, lambda >= 0, iterations >= 1");
  }
  ComplexImage x = zero_filled(measured, mask);
  const double limit = 1e6 * std::max(l2_norm(x.planes), 1e-30);
  if (fidelity_trace != nullptr) fidelity_trace->push_back(data_fidelity(x, measured, mask));
  for (int it = 0; it < cfg.iterations; ++it) {
    // E^H (E x - y) = F^H M (F x - y)
    KSpace residual(axpby(forward_E(x, mask).planes, -1.0, measured.planes));
    Tensor grad = axpby(adjoint_E(residual, mask).planes, 2.0 * cfg.lambda, x.planes);
    x = ComplexImage(axpby(x.planes, -cfg.eta, grad));
    const double norm = l2_norm(x.planes);
    if (!std::isfinite(norm) || norm > limit) {
      std::ostringstream msg;
      msg << "classical_recon diverged at iteration " << it + 1 << " (|x| = " << norm
          << "); reduce the learning rate eta = " << cfg.eta;
      throw NumericError(msg.str());
    }
    if (fidelity_trace != nullptr) fidelity_trace->push_back(data_fidelity(x, measured, mask));
  }
  return x;
}

Var dc_layer(const Var& recon, const Tensor& measured, std::span<const Mask> masks) {
  require_match(recon.value(), measured, "dc_layer");
  if (recon.value().rank() != 4) {
    throw DimensionError("dc_layer: expected [B,2,H,W], got " + shape_string(recon.shape()));
  }
  std::vector<Mask> kept(masks.begin(), masks.end());
  Tensor out = dc_planes(recon.value(), apply_mask(measured, kept), kept);
  return recon.tape().record(std::move(out), {recon},
                             [kept = std::move(kept)](const Tensor& g, Tape::GradSlots slots) {
                               Tensor back = ifft2c(apply_complement(fft2c(g), kept));
                               visit_dtype(g.dtype(), [&]<class T>() {
                                 auto d = slots[0]->mutable_data<T>();
                                 auto b = back.data<T>();
                                 for (std::size_t i = 0; i < d.size(); ++i) d[i] += b[i];
                               });
                             });
}

}  // namespace nodemr::mri
