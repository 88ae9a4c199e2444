#include "nodemr/mri/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "nodemr/tensor/random.hpp"

namespace nodemr::mri {

ComplexImage make_phantom(std::int64_t size, std::uint64_t seed, DType dtype) {
  if (size < 32) throw ConfigError("make_phantom: size must be at least 32, got " + std::to_string(size));
  Rng rng(derive_seed(seed, "phantom"));
  const std::size_t n = std::size_t(size);
  std::vector<double> mag(n * n, 0.0);

  // Coordinates in [-1, 1] at pixel centers.
  auto coord = [&](std::size_t i) { return (2.0 * double(i) + 1.0) / double(size) - 1.0; };

  const auto count = rng.uniform_int(5, 12);
  for (std::int64_t e = 0; e < count; ++e) {
    const double cx = rng.uniform(-0.6, 0.6), cy = rng.uniform(-0.6, 0.6);
    const double ax = rng.uniform(0.08, 0.5), ay = rng.uniform(0.08, 0.5);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double intensity = rng.uniform(0.1, 1.0);
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double dx = coord(x) - cx, dy = coord(y) - cy;
        const double u = (c * dx + s * dy) / ax, v = (-s * dx + c * dy) / ay;
        if (u * u + v * v <= 1.0) mag[y * n + x] += intensity;
      }
    }
  }
  const double peak = *std::max_element(mag.begin(), mag.end());
  // Ellipses are at least 0.08 wide around a center inside the field of view,
  // so some pixel is always covered.
  for (double& m : mag) m /= peak;

  double coef[6];
  for (double& k : coef) k = rng.uniform(-1.0, 1.0);
  std::vector<double> phase(n * n);
  double phase_peak = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double u = coord(x), v = coord(y);
      const double p = coef[0] + coef[1] * u + coef[2] * v + coef[3] * u * u + coef[4] * u * v + coef[5] * v * v;
      phase[y * n + x] = p;
      phase_peak = std::max(phase_peak, std::abs(p));
    }
  }
  const double phase_scale = phase_peak > 0.0 ? (std::numbers::pi / 4.0) / phase_peak : 0.0;

  Tensor planes({2, size, size}, DType::f64);
  auto d = planes.mutable_data<double>();
  for (std::size_t i = 0; i < n * n; ++i) {
    const double phi = phase[i] * phase_scale;
    d[i] = mag[i] * std::cos(phi);
    d[n * n + i] = mag[i] * std::sin(phi);
  }
  return ComplexImage(planes.to(dtype));
}

}  // namespace nodemr::mri
