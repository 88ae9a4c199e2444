#include "nodemr/mri/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace nodemr::mri {
namespace {

template <class T>
struct Fftw;

template <>
struct Fftw<double> {
  using Complex = fftw_complex;
  using Plan = fftw_plan;
  static Plan plan(int h, int w, Complex* in, Complex* out, int sign) {
    return fftw_plan_dft_2d(h, w, in, out, sign, FFTW_ESTIMATE);
  }
  static void execute(Plan p, Complex* in, Complex* out) { fftw_execute_dft(p, in, out); }
  static void* alloc(std::size_t n) { return fftw_malloc(n * sizeof(Complex)); }
  static void release(void* p) { fftw_free(p); }
};

template <>
struct Fftw<float> {
  using Complex = fftwf_complex;
  using Plan = fftwf_plan;
  static Plan plan(int h, int w, Complex* in, Complex* out, int sign) {
    return fftwf_plan_dft_2d(h, w, in, out, sign, FFTW_ESTIMATE);
  }
  static void execute(Plan p, Complex* in, Complex* out) { fftwf_execute_dft(p, in, out); }
  static void* alloc(std::size_t n) { return fftwf_malloc(n * sizeof(Complex)); }
  static void release(void* p) { fftwf_free(p); }
};

template <class T>
struct Buffer {
  using Complex = typename Fftw<T>::Complex;
  explicit Buffer(std::size_t n) : ptr(static_cast<Complex*>(Fftw<T>::alloc(n))) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~Buffer() { Fftw<T>::release(ptr); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  Complex* ptr;
};

// Planning is not thread-safe in FFTW; execution with new-array execute is.
// Plans are created once per (H, W, sign) and never destroyed.
std::mutex plan_mutex;

template <class T>
typename Fftw<T>::Plan cached_plan(int h, int w, int sign) {
  static std::map<std::tuple<int, int, int>, typename Fftw<T>::Plan> plans;
  std::lock_guard lock(plan_mutex);
  auto key = std::tuple(h, w, sign);
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  Buffer<T> a(std::size_t(h) * w), b(std::size_t(h) * w);
  auto p = Fftw<T>::plan(h, w, a.ptr, b.ptr, sign);
  if (p == nullptr) throw NumericError("FFTW could not plan a " + std::to_string(h) + "x" + std::to_string(w) + " DFT");
  plans.emplace(key, p);
  return p;
}

void require_planes(const Tensor& t, const char* op) {
  if (t.rank() < 3 || t.dim(-3) != 2) {
    throw DimensionError(std::string(op) + ": expected [...,2,H,W], got " + shape_string(t.shape()));
  }
}

template <class T>
void transform(const Tensor& in, Tensor& out, int sign) {
  const int H = int(in.dim(-2)), W = int(in.dim(-1));
  const std::size_t plane = std::size_t(H) * W;
  const std::size_t images = std::size_t(in.numel()) / (2 * plane);
  auto plan = cached_plan<T>(H, W, sign);
  Buffer<T> a(plane), b(plane);
  const T scale = T(1.0 / std::sqrt(double(plane)));
  const int hh = H / 2, hw = W / 2;
  auto src = in.data<T>();
  auto dst = out.mutable_data<T>();
  for (std::size_t n = 0; n < images; ++n) {
    const T* re = src.data() + 2 * n * plane;
    const T* im = re + plane;
    // ifftshift on the way in: a[i] = x[(i + n/2) mod n] per axis.
    for (int y = 0; y < H; ++y) {
      const int sy = (y + hh) % H;
      for (int x = 0; x < W; ++x) {
        const std::size_t s = std::size_t(sy) * W + std::size_t((x + hw) % W);
        a.ptr[std::size_t(y) * W + x][0] = re[s];
        a.ptr[std::size_t(y) * W + x][1] = im[s];
      }
    }
    Fftw<T>::execute(plan, a.ptr, b.ptr);
    T* ore = dst.data() + 2 * n * plane;
    T* oim = ore + plane;
    // fftshift on the way out: out[i] = b[(i - n/2) mod n] per axis.
    for (int y = 0; y < H; ++y) {
      const int sy = (y + H - hh) % H;
      for (int x = 0; x < W; ++x) {
        const std::size_t s = std::size_t(sy) * W + std::size_t((x + W - hw) % W);
        ore[std::size_t(y) * W + x] = b.ptr[s][0] * scale;
        oim[std::size_t(y) * W + x] = b.ptr[s][1] * scale;
      }
    }
  }
}

Tensor run(const Tensor& planes, int sign, const char* op) {
  require_planes(planes, op);
  Tensor out(planes.shape(), planes.dtype());
  if (planes.numel() == 0) return out;
  visit_dtype(planes.dtype(), [&]<class T>() { transform<T>(planes, out, sign); });
  return out;
}

// keep_sampled: M k; otherwise (1 - M) k.
Tensor mask_columns(const Tensor& planes, std::span<const Mask> masks, bool keep_sampled, const char* op) {
  require_planes(planes, op);
  const std::int64_t H = planes.dim(-2), W = planes.dim(-1);
  const std::int64_t images = planes.numel() / (2 * H * W);
  if (masks.size() != 1 && std::int64_t(masks.size()) != images) {
    throw DimensionError(std::string(op) + ": " + std::to_string(masks.size()) + " masks for " +
                         std::to_string(images) + " images");
  }
  for (const Mask& m : masks) {
    if (m.width() != W) {
      throw DimensionError(std::string(op) + ": mask width " + std::to_string(m.width()) + " vs k-space width " +
                           std::to_string(W));
    }
  }
  Tensor out = planes.clone();
  visit_dtype(planes.dtype(), [&]<class T>() {
    auto d = out.mutable_data<T>();
    for (std::int64_t n = 0; n < images; ++n) {
      const Mask& m = masks.size() == 1 ? masks[0] : masks[std::size_t(n)];
      T* base = d.data() + 2 * n * H * W;
      for (std::int64_t r = 0; r < 2 * H; ++r) {
        T* row = base + r * W;
        for (std::int64_t x = 0; x < W; ++x) {
          if ((m.columns[std::size_t(x)] != 0) != keep_sampled) row[x] = T(0);
        }
      }
    }
  });
  return out;
}

}  // namespace

Tensor fft2c(const Tensor& planes) { return run(planes, FFTW_FORWARD, "fft2c"); }
Tensor ifft2c(const Tensor& planes) { return run(planes, FFTW_BACKWARD, "ifft2c"); }

Tensor apply_mask(const Tensor& planes, std::span<const Mask> masks) {
  return mask_columns(planes, masks, true, "apply_mask");
}

Tensor apply_complement(const Tensor& planes, std::span<const Mask> masks) {
  return mask_columns(planes, masks, false, "apply_complement");
}

}  // namespace nodemr::mri
