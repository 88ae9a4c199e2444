#include "nodemr/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nodemr/tensor/ops.hpp"

namespace nodemr::train {
namespace {

using Plane = std::vector<double>;

Plane to_doubles(const Tensor& t) {
  Plane out(std::size_t(t.numel()));
  visit_dtype(t.dtype(), [&]<class T>() {
    const auto d = t.data<T>();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = double(d[i]);
  });
  return out;
}

void require_planes(const Shape& s, const char* what) {
  if (s.size() < 3 || s[s.size() - 3] != 2) {
    throw DimensionError(std::string(what) + ": expected [..., 2, H, W], got " + shape_string(s));
  }
}

// Means over every window lying fully inside the h x w plane.
Plane box_mean(const Plane& p, std::int64_t h, std::int64_t w) {
  const std::int64_t k = kSsimWindow, oh = h - k + 1, ow = w - k + 1;
  Plane rows(std::size_t(h * ow), 0.0);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::int64_t j = 0; j < k; ++j) s += p[std::size_t(y * w + x + j)];
      rows[std::size_t(y * ow + x)] = s;
    }
  Plane out(std::size_t(oh * ow), 0.0);
  const double inv = 1.0 / double(k * k);
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::int64_t i = 0; i < k; ++i) s += rows[std::size_t((y + i) * ow + x)];
      out[std::size_t(y * ow + x)] = s * inv;
    }
  return out;
}

// Transpose of box_mean: spreads each window value back over its pixels.
Plane box_mean_adjoint(const Plane& g, std::int64_t h, std::int64_t w) {
  const std::int64_t k = kSsimWindow, oh = h - k + 1, ow = w - k + 1;
  Plane rows(std::size_t(h * ow), 0.0);
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t i = 0; i < k; ++i)
      for (std::int64_t x = 0; x < ow; ++x) rows[std::size_t((y + i) * ow + x)] += g[std::size_t(y * ow + x)];
  Plane out(std::size_t(h * w), 0.0);
  const double inv = 1.0 / double(k * k);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < ow; ++x)
      for (std::int64_t j = 0; j < k; ++j) out[std::size_t(y * w + x + j)] += rows[std::size_t(y * ow + x)] * inv;
  return out;
}

// Mean SSIM over valid windows; fills dSSIM/dx when grad_x is given.
double ssim_plane(const Plane& x, const Plane& y, std::int64_t h, std::int64_t w, double range, Plane* grad_x) {
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ContractError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                        std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) + " window");
  }
  if (!(range > 0.0)) throw ContractError("ssim: dynamic range must be positive (truth image is zero?)");
  const std::size_t n = x.size();
  Plane xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const Plane ux = box_mean(x, h, w), uy = box_mean(y, h, w);
  const Plane mxx = box_mean(xx, h, w), myy = box_mean(yy, h, w), mxy = box_mean(xy, h, w);
  const double np = double(kSsimWindow * kSsimWindow), cn = np / (np - 1.0);
  const double c1 = (kSsimK1 * range) * (kSsimK1 * range), c2 = (kSsimK2 * range) * (kSsimK2 * range);
  const std::size_t windows = ux.size();
  Plane gu, gxy, gxx;
  if (grad_x) {
    gu.assign(windows, 0.0);
    gxy.assign(windows, 0.0);
    gxx.assign(windows, 0.0);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < windows; ++i) {
    const double vx = cn * (mxx[i] - ux[i] * ux[i]);
    const double vy = cn * (myy[i] - uy[i] * uy[i]);
    const double vxy = cn * (mxy[i] - ux[i] * uy[i]);
    const double a1 = 2.0 * ux[i] * uy[i] + c1, a2 = 2.0 * vxy + c2;
    const double b1 = ux[i] * ux[i] + uy[i] * uy[i] + c1, b2 = vx + vy + c2;
    const double s = (a1 * a2) / (b1 * b2);
    total += s;
    if (grad_x) {
      const double scale = s / double(windows);
      gu[i] = scale * (2.0 * uy[i] / a1 - 2.0 * cn * uy[i] / a2 - 2.0 * ux[i] / b1 + 2.0 * cn * ux[i] / b2);
      gxy[i] = scale * 2.0 * cn / a2;
      gxx[i] = -scale * cn / b2;
    }
  }
  if (grad_x) {
    const Plane du = box_mean_adjoint(gu, h, w), dxy = box_mean_adjoint(gxy, h, w), dxx = box_mean_adjoint(gxx, h, w);
    grad_x->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*grad_x)[i] = du[i] + y[i] * dxy[i] + 2.0 * x[i] * dxx[i];
  }
  return total / double(windows);
}

void require_batch_match(const Var& pred, const Tensor& truth, const char* what) {
  const Shape& s = pred.shape();
  if (s.size() != 4 || s[1] != 2) throw DimensionError(std::string(what) + ": pred must be [B,2,H,W], got " + shape_string(s));
  if (truth.shape() != s) {
    throw DimensionError(std::string(what) + ": pred " + shape_string(s) + " vs truth " + shape_string(truth.shape()));
  }
}

// mean |a - b| over every element; a is on the tape, b is data.
Var l1_mean(const Var& a, const Tensor& b) {
  const Tensor av = a.value();
  const Plane x = to_doubles(av), y = to_doubles(b);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  const double n = double(std::max<std::size_t>(1, x.size()));
  const Var in[] = {a};
  return a.tape().record(Tensor::scalar(s / n, av.dtype()), in, [x, y, n](const Tensor& g, Tape::GradSlots slots) {
    if (slots[0] == nullptr) return;
    const double gs = g.item() / n;
    visit_dtype(slots[0]->dtype(), [&]<class T>() {
      auto d = slots[0]->mutable_data<T>();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > y[i]) d[i] += T(gs);
        else if (x[i] < y[i]) d[i] -= T(gs);
      }
    });
  });
}

// Batch mean of per-sample SSIM on [B,H,W] magnitudes.
Var ssim_mean(const Var& mag, const Tensor& mag_truth) {
  const Tensor mv = mag.value();
  const std::int64_t b = mv.dim(0), h = mv.dim(1), w = mv.dim(2), hw = h * w;
  const Plane x = to_doubles(mv), y = to_doubles(mag_truth);
  auto grads = std::make_shared<std::vector<Plane>>(std::size_t(b));
  double total = 0.0;
  for (std::int64_t i = 0; i < b; ++i) {
    const Plane xi(x.begin() + i * hw, x.begin() + (i + 1) * hw), yi(y.begin() + i * hw, y.begin() + (i + 1) * hw);
    const double range = *std::max_element(yi.begin(), yi.end());
    total += ssim_plane(xi, yi, h, w, range, &(*grads)[std::size_t(i)]);
  }
  const Var in[] = {mag};
  return mag.tape().record(Tensor::scalar(total / double(b), mv.dtype()), in,
                           [grads, b, hw](const Tensor& g, Tape::GradSlots slots) {
                             if (slots[0] == nullptr) return;
                             const double gs = g.item() / double(b);
                             visit_dtype(slots[0]->dtype(), [&]<class T>() {
                               auto d = slots[0]->mutable_data<T>();
                               for (std::int64_t i = 0; i < b; ++i)
                                 for (std::int64_t p = 0; p < hw; ++p)
                                   d[std::size_t(i * hw + p)] += T(gs * (*grads)[std::size_t(i)][std::size_t(p)]);
                             });
                           });
}

}  // namespace

Tensor magnitude(const Tensor& planes) {
  const Shape& s = planes.shape();
  require_planes(s, "magnitude");
  Shape out_shape(s.begin(), s.end() - 3);
  out_shape.push_back(s[s.size() - 2]);
  out_shape.push_back(s[s.size() - 1]);
  Tensor out(out_shape, planes.dtype());
  const std::int64_t hw = s[s.size() - 2] * s[s.size() - 1], lead = out.numel() / std::max<std::int64_t>(hw, 1);
  visit_dtype(planes.dtype(), [&]<class T>() {
    const auto in = planes.data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t b = 0; b < lead; ++b)
      for (std::int64_t p = 0; p < hw; ++p) {
        const double re = in[std::size_t(2 * b * hw + p)], im = in[std::size_t((2 * b + 1) * hw + p)];
        o[std::size_t(b * hw + p)] = T(std::hypot(re, im));
      }
  });
  return out;
}

double psnr(const mri::ComplexImage& pred, const mri::ComplexImage& truth) {
  if (pred.planes.shape() != truth.planes.shape()) {
    throw DimensionError("psnr: " + shape_string(pred.planes.shape()) + " vs " + shape_string(truth.planes.shape()));
  }
  const Plane p = to_doubles(magnitude(pred.planes)), t = to_doubles(magnitude(truth.planes));
  const double peak = *std::max_element(t.begin(), t.end());
  if (!(peak > 0.0)) throw ContractError("psnr: truth image is zero");
  double se = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) se += (p[i] - t[i]) * (p[i] - t[i]);
  if (se == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / (se / double(p.size())));
}

double ssim_real(const Tensor& a, const Tensor& b, double range) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw DimensionError("ssim: expected two [H,W] images, got " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  return ssim_plane(to_doubles(a), to_doubles(b), a.dim(0), a.dim(1), range, nullptr);
}

double ssim(const mri::ComplexImage& pred, const mri::ComplexImage& truth) {
  if (pred.planes.shape() != truth.planes.shape()) {
    throw DimensionError("ssim: " + shape_string(pred.planes.shape()) + " vs " + shape_string(truth.planes.shape()));
  }
  const Tensor mt = magnitude(truth.planes);
  const Plane t = to_doubles(mt);
  return ssim_real(magnitude(pred.planes), mt, *std::max_element(t.begin(), t.end()));
}

Var magnitude(const Var& planes) {
  const Tensor x = planes.value();
  if (x.rank() != 4 || x.dim(1) != 2) throw DimensionError("magnitude: expected [B,2,H,W], got " + shape_string(x.shape()));
  Tensor out = magnitude(x);
  const Var in[] = {planes};
  return planes.tape().record(out, in, [x, out](const Tensor& g, Tape::GradSlots slots) {
    if (slots[0] == nullptr) return;
    const std::int64_t hw = x.dim(2) * x.dim(3), b = x.dim(0);
    visit_dtype(g.dtype(), [&]<class T>() {
      const auto xv = x.data<T>(), mv = out.data<T>(), gv = g.data<T>();
      auto d = slots[0]->mutable_data<T>();
      for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t p = 0; p < hw; ++p) {
          const T m = mv[std::size_t(i * hw + p)];
          if (m == T(0)) continue;  // subgradient 0 at the origin
          const T s = gv[std::size_t(i * hw + p)] / m;
          d[std::size_t(2 * i * hw + p)] += s * xv[std::size_t(2 * i * hw + p)];
          d[std::size_t((2 * i + 1) * hw + p)] += s * xv[std::size_t((2 * i + 1) * hw + p)];
        }
    });
  });
}

Var l1_magnitude(const Var& pred, const Tensor& truth) {
  require_batch_match(pred, truth, "l1_magnitude");
  return l1_mean(magnitude(pred), magnitude(truth));
}

Var ssim_magnitude(const Var& pred, const Tensor& truth) {
  require_batch_match(pred, truth, "ssim_magnitude");
  return ssim_mean(magnitude(pred), magnitude(truth));
}

Var recon_loss(const Var& pred, const Tensor& truth) {
  require_batch_match(pred, truth, "recon_loss");
  const Var mag = magnitude(pred);
  const Tensor mag_truth = magnitude(truth);
  const Var parts[] = {l1_mean(mag, mag_truth), ssim_mean(mag, mag_truth)};
  return ops::add_scalar(ops::linear_combination(parts, std::vector<double>{1.0, -0.5}), 0.5);
}

}  // namespace nodemr::train
