#include "nodemr/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nodemr/kernels/kernels.hpp"

namespace nodemr::ops {
namespace {

Tape& same_tape(std::span<const Var> vars, const char* op) {
  if (vars.empty()) throw ContractError(std::string(op) + ": no inputs");
  Tape& tape = vars[0].tape();
  for (const Var& v : vars) {
    if (&v.tape() != &tape) throw ContractError(std::string(op) + ": inputs live on different tapes");
    if (v.dtype() != vars[0].dtype()) throw ContractError(std::string(op) + ": mixed dtypes");
  }
  return tape;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void require_rank4(const Var& v, const char* op, const char* what) {
  if (v.value().rank() != 4) {
    throw DimensionError(std::string(op) + ": " + what + " must be [B,C,H,W], got " + shape_string(v.shape()));
  }
}

// y += a * x for tensors of one dtype.
void accumulate(Tensor& y, double a, const Tensor& x) {
  visit_dtype(y.dtype(), [&]<class T>() {
    kernels::axpy(std::size_t(y.numel()), T(a), x.data<T>().data(), y.mutable_data<T>().data());
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const Var in[] = {a, b};
  return linear_combination(in, std::vector<double>{1.0, 1.0});
}

Var sub(const Var& a, const Var& b) {
  const Var in[] = {a, b};
  return linear_combination(in, std::vector<double>{1.0, -1.0});
}

Var mul(const Var& a, const Var& b) {
  const Var in[] = {a, b};
  Tape& tape = same_tape(in, "mul");
  require_same_shape(a, b, "mul");
  const Tensor av = a.value(), bv = b.value();
  Tensor out(av.shape(), av.dtype());
  visit_dtype(av.dtype(), [&]<class T>() {
    auto x = av.data<T>();
    auto y = bv.data<T>();
    auto o = out.mutable_data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  });
  return tape.record(std::move(out), in, [av, bv](const Tensor& g, Tape::GradSlots slots) {
    visit_dtype(g.dtype(), [&]<class T>() {
      auto gd = g.data<T>();
      if (slots[0] != nullptr) {
        auto d = slots[0]->mutable_data<T>();
        auto y = bv.data<T>();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * y[i];
      }
      if (slots[1] != nullptr) {
        auto d = slots[1]->mutable_data<T>();
        auto x = av.data<T>();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * x[i];
      }
    });
  });
}

Var scale(const Var& a, double s) {
  const Var in[] = {a};
  return linear_combination(in, std::vector<double>{s});
}

Var add_scalar(const Var& a, double c) {
  const Var in[] = {a};
  Tape& tape = same_tape(in, "add_scalar");
  Tensor out = a.value().clone();
  visit_dtype(out.dtype(), [&]<class T>() {
    for (T& v : out.mutable_data<T>()) v += T(c);
  });
  return tape.record(std::move(out), in, [](const Tensor& g, Tape::GradSlots slots) {
    if (slots[0] != nullptr) accumulate(*slots[0], 1.0, g);
  });
}

Var linear_combination(std::span<const Var> terms, std::span<const double> coeffs) {
  Tape& tape = same_tape(terms, "linear_combination");
  if (terms.size() != coeffs.size()) {
    throw ContractError("linear_combination: " + std::to_string(terms.size()) + " terms, " +
                        std::to_string(coeffs.size()) + " coefficients");
  }
  for (const Var& t : terms) require_same_shape(terms[0], t, "linear_combination");
  Tensor out = Tensor::zeros_like(terms[0].value());
  for (std::size_t i = 0; i < terms.size(); ++i) accumulate(out, coeffs[i], terms[i].value());
  std::vector<double> c(coeffs.begin(), coeffs.end());
  return tape.record(std::move(out), terms, [c = std::move(c)](const Tensor& g, Tape::GradSlots slots) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i] != nullptr) accumulate(*slots[i], c[i], g);
    }
  });
}

Var sum(const Var& a) {
  const Var in[] = {a};
  Tape& tape = same_tape(in, "sum");
  const double total = visit_dtype(a.dtype(), [&]<class T>() {
    double s = 0.0;
    for (T v : a.value().data<T>()) s += double(v);
    return s;
  });
  return tape.record(Tensor::scalar(total, a.dtype()), in, [](const Tensor& g, Tape::GradSlots slots) {
    if (slots[0] == nullptr) return;
    const double gv = g.item();
    visit_dtype(g.dtype(), [&]<class T>() {
      for (T& d : slots[0]->mutable_data<T>()) d += T(gv);
    });
  });
}

Var mean(const Var& a) {
  const double n = double(std::max<std::int64_t>(1, a.value().numel()));
  return scale(sum(a), 1.0 / n);
}

Var relu(const Var& a) {
  const Var in[] = {a};
  Tape& tape = same_tape(in, "relu");
  const Tensor x = a.value();
  Tensor out(x.shape(), x.dtype());
  visit_dtype(x.dtype(), [&]<class T>() {
    kernels::relu_forward(std::size_t(x.numel()), x.data<T>().data(), out.mutable_data<T>().data());
  });
  return tape.record(std::move(out), in, [x](const Tensor& g, Tape::GradSlots slots) {
    if (slots[0] == nullptr) return;
    visit_dtype(g.dtype(), [&]<class T>() {
      kernels::relu_backward(std::size_t(g.numel()), x.data<T>().data(), g.data<T>().data(),
                             slots[0]->mutable_data<T>().data());
    });
  });
}

Var concat_channels(std::span<const Var> parts) {
  Tape& tape = same_tape(parts, "concat_channels");
  for (const Var& p : parts) require_rank4(p, "concat_channels", "every part");
  const Shape& s0 = parts[0].shape();
  std::int64_t channels = 0;
  std::vector<std::int64_t> widths;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw DimensionError("concat_channels: cannot join " + shape_string(s0) + " with " + shape_string(s) +
                           " (batch and spatial extents must match)");
    }
    widths.push_back(s[1]);
    channels += s[1];
  }
  const std::int64_t B = s0[0], plane = s0[2] * s0[3];
  Tensor out(Shape{B, channels, s0[2], s0[3]}, parts[0].dtype());
  visit_dtype(out.dtype(), [&]<class T>() {
    auto o = out.mutable_data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      std::int64_t c0 = 0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        auto src = parts[i].value().data<T>();
        const std::int64_t n = widths[i] * plane;
        std::copy_n(src.begin() + b * n, n, o.begin() + (b * channels + c0) * plane);
        c0 += widths[i];
      }
    }
  });
  return tape.record(std::move(out), parts, [widths, channels, B, plane](const Tensor& g, Tape::GradSlots slots) {
    visit_dtype(g.dtype(), [&]<class T>() {
      auto gd = g.data<T>();
      for (std::int64_t b = 0; b < B; ++b) {
        std::int64_t c0 = 0;
        for (std::size_t i = 0; i < slots.size(); ++i) {
          const std::int64_t n = widths[i] * plane;
          if (slots[i] != nullptr) {
            auto d = slots[i]->mutable_data<T>();
            const T* src = gd.data() + (b * channels + c0) * plane;
            T* dst = d.data() + b * n;
            for (std::int64_t j = 0; j < n; ++j) dst[j] += src[j];
          }
          c0 += widths[i];
        }
      }
    });
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat_channels(parts);
}

Var slice_channels(const Var& a, int begin, int end) {
  const Var in[] = {a};
  Tape& tape = same_tape(in, "slice_channels");
  require_rank4(a, "slice_channels", "input");
  const Shape& s = a.shape();
  if (begin < 0 || end > s[1] || begin > end) {
    throw DimensionError("slice_channels: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_string(s));
  }
  const std::int64_t B = s[0], C = s[1], plane = s[2] * s[3], width = end - begin;
  Tensor out(Shape{B, width, s[2], s[3]}, a.dtype());
  visit_dtype(a.dtype(), [&]<class T>() {
    auto src = a.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      std::copy_n(src.begin() + (b * C + begin) * plane, width * plane, o.begin() + b * width * plane);
    }
  });
  return tape.record(std::move(out), in, [B, C, plane, width, begin](const Tensor& g, Tape::GradSlots slots) {
    if (slots[0] == nullptr) return;
    visit_dtype(g.dtype(), [&]<class T>() {
      auto gd = g.data<T>();
      auto d = slots[0]->mutable_data<T>();
      for (std::int64_t b = 0; b < B; ++b) {
        const T* src = gd.data() + b * width * plane;
        T* dst = d.data() + (b * C + begin) * plane;
        for (std::int64_t j = 0; j < width * plane; ++j) dst[j] += src[j];
      }
    });
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int dilation) {
  const Var in[] = {x, weight, bias};
  Tape& tape = same_tape(in, "conv2d");
  require_rank4(x, "conv2d", "input");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.size() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0) {
    throw DimensionError("conv2d: weight must be [Cout,Cin,k,k] with odd k, got " + shape_string(ws));
  }
  if (ws[1] != xs[1]) {
    throw DimensionError("conv2d: input has " + std::to_string(xs[1]) + " channels but weight " + shape_string(ws) +
                         " expects " + std::to_string(ws[1]));
  }
  if (bias.shape() != Shape{ws[0]}) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(ws[0]) + " output channels");
  }
  if (dilation < 1) throw ContractError("conv2d: dilation must be >= 1, got " + std::to_string(dilation));

  kernels::ConvShape cs;
  cs.batch = int(xs[0]);
  cs.in_channels = int(xs[1]);
  cs.out_channels = int(ws[0]);
  cs.height = int(xs[2]);
  cs.width = int(xs[3]);
  cs.kernel = int(ws[2]);
  cs.dilation = dilation;

  const Tensor xv = x.value(), wv = weight.value(), bv = bias.value();
  Tensor out(Shape{xs[0], ws[0], xs[2], xs[3]}, x.dtype());
  visit_dtype(x.dtype(), [&]<class T>() {
    kernels::conv2d_forward(cs, xv.data<T>().data(), wv.data<T>().data(), bv.data<T>().data(),
                            out.mutable_data<T>().data());
  });
  return tape.record(std::move(out), in, [cs, xv, wv](const Tensor& g, Tape::GradSlots slots) {
    visit_dtype(g.dtype(), [&]<class T>() {
      const T* gd = g.data<T>().data();
      if (slots[0] != nullptr) {
        kernels::conv2d_backward_input(cs, gd, wv.data<T>().data(), slots[0]->mutable_data<T>().data());
      }
      if (slots[1] != nullptr || slots[2] != nullptr) {
        Tensor scratch;
        T* dw = nullptr;
        if (slots[1] != nullptr) {
          dw = slots[1]->mutable_data<T>().data();
        } else {
          scratch = Tensor::zeros_like(wv);
          dw = scratch.mutable_data<T>().data();
        }
        T* db = slots[2] != nullptr ? slots[2]->mutable_data<T>().data() : nullptr;
        kernels::conv2d_backward_weight(cs, gd, xv.data<T>().data(), dw, db);
      }
    });
  });
}

Var time_channel(const Var& scale_var, const Var& offset, double t, std::int64_t batch, std::int64_t height,
                 std::int64_t width) {
  const Var in[] = {scale_var, offset};
  Tape& tape = same_tape(in, "time_channel");
  if (scale_var.value().numel() != 1 || offset.value().numel() != 1) {
    throw DimensionError("time_channel: scale and offset must hold one element each");
  }
  Tensor out = Tensor::full(Shape{batch, 1, height, width}, 0.0, scale_var.dtype());
  visit_dtype(out.dtype(), [&]<class T>() {
    const T s = T(scale_var.value().data<T>()[0]) * T(t) + offset.value().data<T>()[0];
    for (T& v : out.mutable_data<T>()) v = s;
  });
  return tape.record(std::move(out), in, [t](const Tensor& g, Tape::GradSlots slots) {
    const double total = visit_dtype(g.dtype(), [&]<class T>() {
      double s = 0.0;
      for (T v : g.data<T>()) s += double(v);
      return s;
    });
    if (slots[0] != nullptr) slots[0]->set(0, slots[0]->at(0) + t * total);
    if (slots[1] != nullptr) slots[1]->set(0, slots[1]->at(0) + total);
  });
}

Var softmax_channels(const Var& logits) {
  const Var in[] = {logits};
  Tape& tape = same_tape(in, "softmax_channels");
  require_rank4(logits, "softmax_channels", "logits");
  const Shape& s = logits.shape();
  const std::int64_t B = s[0], S = s[1], plane = s[2] * s[3];
  Tensor out(s, logits.dtype());
  visit_dtype(out.dtype(), [&]<class T>() {
    auto x = logits.value().data<T>();
    auto y = out.mutable_data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t p = 0; p < plane; ++p) {
        const std::int64_t base = b * S * plane + p;
        T m = x[base];
        for (std::int64_t i = 1; i < S; ++i) m = std::max(m, x[base + i * plane]);
        T z = 0;
        for (std::int64_t i = 0; i < S; ++i) {
          const T e = std::exp(x[base + i * plane] - m);
          y[base + i * plane] = e;
          z += e;
        }
        for (std::int64_t i = 0; i < S; ++i) y[base + i * plane] /= z;
      }
    }
  });
  const Tensor yv = out;
  return tape.record(std::move(out), in, [yv, B, S, plane](const Tensor& g, Tape::GradSlots slots) {
    if (slots[0] == nullptr) return;
    visit_dtype(g.dtype(), [&]<class T>() {
      auto y = yv.data<T>();
      auto gd = g.data<T>();
      auto d = slots[0]->mutable_data<T>();
      for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t p = 0; p < plane; ++p) {
          const std::int64_t base = b * S * plane + p;
          T dot = 0;
          for (std::int64_t i = 0; i < S; ++i) dot += gd[base + i * plane] * y[base + i * plane];
          for (std::int64_t i = 0; i < S; ++i) {
            d[base + i * plane] += y[base + i * plane] * (gd[base + i * plane] - dot);
          }
        }
      }
    });
  });
}

Var weighted_stage_sum(const Var& weights, std::span<const Var> stages) {
  if (stages.empty()) throw ContractError("weighted_stage_sum: no stages");
  std::vector<Var> in{weights};
  in.insert(in.end(), stages.begin(), stages.end());
  Tape& tape = same_tape(in, "weighted_stage_sum");
  require_rank4(weights, "weighted_stage_sum", "weights");
  const Shape& ws = weights.shape();
  const Shape& fs = stages[0].shape();
  for (const Var& f : stages) {
    require_rank4(f, "weighted_stage_sum", "stage");
    require_same_shape(stages[0], f, "weighted_stage_sum");
  }
  if (ws[1] != std::int64_t(stages.size()) || ws[0] != fs[0] || ws[2] != fs[2] || ws[3] != fs[3]) {
    throw DimensionError("weighted_stage_sum: weights " + shape_string(ws) + " do not fit " +
                         std::to_string(stages.size()) + " stages of " + shape_string(fs));
  }
  const std::int64_t B = fs[0], C = fs[1], S = ws[1], plane = fs[2] * fs[3];
  std::vector<Tensor> fv;
  for (const Var& f : stages) fv.push_back(f.value());
  const Tensor wv = weights.value();
  Tensor out(fs, weights.dtype());
  visit_dtype(out.dtype(), [&]<class T>() {
    auto w = wv.data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t i = 0; i < S; ++i) {
      auto f = fv[std::size_t(i)].data<T>();
      for (std::int64_t b = 0; b < B; ++b) {
        const T* wrow = w.data() + (b * S + i) * plane;
        for (std::int64_t c = 0; c < C; ++c) {
          const std::int64_t base = (b * C + c) * plane;
          for (std::int64_t p = 0; p < plane; ++p) o[base + p] += wrow[p] * f[base + p];
        }
      }
    }
  });
  return tape.record(std::move(out), in, [wv, fv, B, C, S, plane](const Tensor& g, Tape::GradSlots slots) {
    visit_dtype(g.dtype(), [&]<class T>() {
      auto w = wv.data<T>();
      auto gd = g.data<T>();
      for (std::int64_t i = 0; i < S; ++i) {
        auto f = fv[std::size_t(i)].data<T>();
        Tensor* dw = slots[0];
        Tensor* df = slots[std::size_t(i) + 1];
        for (std::int64_t b = 0; b < B; ++b) {
          const T* wrow = w.data() + (b * S + i) * plane;
          for (std::int64_t c = 0; c < C; ++c) {
            const std::int64_t base = (b * C + c) * plane;
            if (df != nullptr) {
              T* d = df->mutable_data<T>().data() + base;
              for (std::int64_t p = 0; p < plane; ++p) d[p] += wrow[p] * gd[base + p];
            }
            if (dw != nullptr) {
              T* d = dw->mutable_data<T>().data() + (b * S + i) * plane;
              for (std::int64_t p = 0; p < plane; ++p) d[p] += gd[base + p] * f[base + p];
            }
          }
        }
      }
    });
  });
}

}  // namespace nodemr::ops
