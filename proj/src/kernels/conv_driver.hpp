#pragma once

// Tiling shared by the AVX2 and AVX-512 convolution variants. The kernels read
// shifted rows of a zero-padded copy of each input image, so no im2col buffer
// is materialised: for output row y and pixel x, tap k = (ci, kh, kw) lives at
// padded[off[k] + y * wp + x]. Traits supply the register-blocked tiles.
//
// Everything here is a template over Traits (which live in anonymous
// namespaces), so each variant's translation unit gets private instantiations.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

#include "nodemr/kernels/kernels.hpp"

namespace nodemr::kernels::detail {

struct PaddedLayout {
  int hp = 0;
  int wp = 0;
  std::size_t plane = 0;
  std::vector<int> offsets;  // one per tap, channel-major then kh, kw
};

inline PaddedLayout make_layout(const ConvShape& s, int slack) {
  PaddedLayout l;
  const int p = s.pad();
  l.hp = s.height + 2 * p;
  l.wp = s.width + 2 * p + slack;
  l.plane = std::size_t(l.hp) * l.wp;
  l.offsets.reserve(std::size_t(s.taps()));
  for (int ci = 0; ci < s.in_channels; ++ci) {
    for (int kh = 0; kh < s.kernel; ++kh) {
      for (int kw = 0; kw < s.kernel; ++kw) {
        l.offsets.push_back(int(ci * l.plane) + kh * s.dilation * l.wp + kw * s.dilation);
      }
    }
  }
  return l;
}

// Copies `channels` planes of H x W into the interior of `dst`; the border
// stays whatever it was (zero after the first call).
inline void pad_into(const PaddedLayout& l, int channels, int H, int W, int p, const float* src,
                     float* dst) {
  for (int c = 0; c < channels; ++c) {
    const float* s = src + std::size_t(c) * H * W;
    float* d = dst + c * l.plane + std::size_t(p) * l.wp + p;
    for (int y = 0; y < H; ++y) std::memcpy(d + std::size_t(y) * l.wp, s + std::size_t(y) * W, sizeof(float) * W);
  }
}

struct RowBlock {
  int row0;
  int rows;
  std::size_t packed_offset;
};

// Splits `rows` output channels into blocks of the sizes listed in `sizes`
// (descending) and packs weights [rows][taps] as [block][tap][row].
inline std::vector<RowBlock> pack_rows(const int* sizes, int n_sizes, int rows, std::size_t taps,
                                       const float* w, std::vector<float>& packed) {
  std::vector<RowBlock> blocks;
  packed.assign(std::size_t(rows) * taps, 0.0f);
  int row = 0;
  std::size_t offset = 0;
  while (row < rows) {
    int mr = 1;
    for (int i = 0; i < n_sizes; ++i) {
      if (sizes[i] <= rows - row) {
        mr = sizes[i];
        break;
      }
    }
    for (std::size_t k = 0; k < taps; ++k) {
      for (int r = 0; r < mr; ++r) packed[offset + k * mr + r] = w[std::size_t(row + r) * taps + k];
    }
    blocks.push_back({row, mr, offset});
    offset += std::size_t(mr) * taps;
    row += mr;
  }
  return blocks;
}

template <class Traits>
void conv_forward(const ConvShape& s, const float* in, const float* w, const float* bias, float* out,
                  bool accumulate) {
  const PaddedLayout l = make_layout(s, Traits::kTile);
  const std::size_t taps = std::size_t(s.taps());
  std::vector<float> packed;
  const std::vector<RowBlock> blocks =
      pack_rows(Traits::kRowSizes, int(std::size(Traits::kRowSizes)), s.out_channels, taps, w, packed);
  std::vector<float> padded(std::size_t(s.in_channels) * l.plane + Traits::kTile, 0.0f);
  const std::size_t plane = std::size_t(s.height) * s.width;
  const int p = s.pad();

  for (int b = 0; b < s.batch; ++b) {
    pad_into(l, s.in_channels, s.height, s.width, p, in + std::size_t(b) * s.in_channels * plane, padded.data());
    float* out_b = out + std::size_t(b) * s.out_channels * plane;
    for (int y = 0; y < s.height; ++y) {
      for (int x0 = 0; x0 < s.width; x0 += Traits::kTile) {
        const int n = std::min(Traits::kTile, s.width - x0);
        const float* src = padded.data() + std::size_t(y) * l.wp + x0;
        for (const RowBlock& blk : blocks) {
          Traits::forward_tile(blk.rows, int(taps), packed.data() + blk.packed_offset, src, l.offsets.data(),
                               out_b + blk.row0 * plane + std::size_t(y) * s.width + x0, int(plane),
                               bias != nullptr ? bias + blk.row0 : nullptr, n, accumulate);
        }
      }
    }
  }
}

// The input gradient of a same-size correlation is a same-size correlation of
// the output gradient with the spatially flipped, channel-transposed kernel.
template <class Traits>
void conv_backward_input(const ConvShape& s, const float* g, const float* w, float* dx) {
  const int k = s.kernel;
  std::vector<float> flipped(std::size_t(s.in_channels) * s.out_channels * k * k);
  for (int co = 0; co < s.out_channels; ++co) {
    for (int ci = 0; ci < s.in_channels; ++ci) {
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          flipped[((std::size_t(ci) * s.out_channels + co) * k + (k - 1 - kh)) * k + (k - 1 - kw)] =
              w[((std::size_t(co) * s.in_channels + ci) * k + kh) * k + kw];
        }
      }
    }
  }
  ConvShape t = s;
  t.in_channels = s.out_channels;
  t.out_channels = s.in_channels;
  conv_forward<Traits>(t, g, flipped.data(), nullptr, dx, /*accumulate=*/true);
}

template <class Traits>
void conv_backward_weight(const ConvShape& s, const float* g, const float* in, float* dw, float* db) {
  const PaddedLayout l = make_layout(s, Traits::kGradTile);
  const int taps = int(s.taps());
  std::vector<float> padded(std::size_t(s.in_channels) * l.plane + Traits::kGradTile, 0.0f);
  const std::size_t plane = std::size_t(s.height) * s.width;
  const int p = s.pad();

  for (int b = 0; b < s.batch; ++b) {
    pad_into(l, s.in_channels, s.height, s.width, p, in + std::size_t(b) * s.in_channels * plane, padded.data());
    const float* g_b = g + std::size_t(b) * s.out_channels * plane;
    int row = 0;
    while (row < s.out_channels) {
      int mr = 1;
      for (int size : Traits::kGradRowSizes) {
        if (size <= s.out_channels - row) {
          mr = size;
          break;
        }
      }
      for (int k0 = 0; k0 < taps; k0 += Traits::kGradTaps) {
        const int kb = std::min(Traits::kGradTaps, taps - k0);
        Traits::weight_tile(mr, kb, s.height, s.width, l.wp, g_b + row * plane, int(plane), padded.data(),
                            l.offsets.data() + k0, dw + std::size_t(row) * taps + k0, taps);
      }
      row += mr;
    }
    if (db != nullptr) {
      for (int co = 0; co < s.out_channels; ++co) {
        const float* gp = g_b + co * plane;
        float acc = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
        db[co] += acc;
      }
    }
  }
}

}  // namespace nodemr::kernels::detail
