// Copyright (c) 2026 The dfmamba Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/tape.h"

namespace dfm::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::int64_t n, c, h, w, co, kh, kw, ho, wo;
  int stride, pad;
};

// cols[(c * kh + i) * kw + j, oy * wo + ox] = x[c, oy*s - p + i, ox*s - p + j]
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const auto out_size = g.ho * g.wo;
  for (std::int64_t c = 0; c < g.c; ++c)
    for (std::int64_t i = 0; i < g.kh; ++i)
      for (std::int64_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * out_size;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = oy * g.stride - g.pad + i;
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = x + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = ox * g.stride - g.pad + j;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* x) {
  const auto out_size = g.ho * g.wo;
  for (std::int64_t c = 0; c < g.c; ++c)
    for (std::int64_t i = 0; i < g.kh; ++i)
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * out_size;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = oy * g.stride - g.pad + i;
          if (iy < 0 || iy >= g.h) continue;
          double* dst = x + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = ox * g.stride - g.pad + j;
            if (ix >= 0 && ix < g.w) dst[ix] += row[oy * g.wo + ox];
          }
        }
      }
}

}  // namespace

Tensor linear_channels(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  DFM_CHECK(x.ndim() >= 2, "linear_channels: input needs [N, C, ...], got ",
            shape_str(x.shape()));
  DFM_CHECK(weight.ndim() == 2 && weight.dim(1) == x.dim(1),
            "linear_channels: weight ", shape_str(weight.shape()),
            " does not match input channels ", x.dim(1));
  const auto n = x.dim(0), c = x.dim(1), co = weight.dim(0);
  const auto sites = x.numel() / (n * c);
  if (bias.defined())
    DFM_CHECK(bias.numel() == co, "linear_channels: bias size ", bias.numel(),
              " != ", co);
  Shape shape = x.shape();
  shape[1] = co;
  Tensor y(shape);
  ConstMatMap wm(weight.ptr(), co, c);
  for (std::int64_t b = 0; b < n; ++b) {
    ConstMatMap xm(x.ptr() + b * c * sites, c, sites);
    MatMap ym(y.ptr() + b * co * sites, co, sites);
    ym.noalias() = wm * xm;
    if (bias.defined())
      for (std::int64_t o = 0; o < co; ++o) ym.row(o).array() += bias[o];
  }
  if (auto* tape = Tape::recording({&x, &weight, &bias})) {
    tape->record("linear_channels", y, [x, weight, bias, y, n, c, co, sites]() mutable {
      const double* gy = y.grad().data();
      ConstMatMap wm(weight.ptr(), co, c);
      for (std::int64_t b = 0; b < n; ++b) {
        ConstMatMap gym(gy + b * co * sites, co, sites);
        if (x.requires_grad()) {
          MatMap gxm(x.mutable_grad().data() + b * c * sites, c, sites);
          gxm.noalias() += wm.transpose() * gym;
        }
        if (weight.requires_grad()) {
          ConstMatMap xm(x.ptr() + b * c * sites, c, sites);
          MatMap gwm(weight.mutable_grad().data(), co, c);
          gwm.noalias() += gym * xm.transpose();
        }
        if (bias.defined() && bias.requires_grad()) {
          auto gb = bias.mutable_grad();
          for (std::int64_t o = 0; o < co; ++o) gb[o] += gym.row(o).sum();
        }
      }
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  DFM_CHECK(x.ndim() == 2, "linear: input needs [N, C], got ", shape_str(x.shape()));
  // [N, C] is [N, C] with zero spatial axes; reuse the per-site map.
  return linear_channels(x, weight, bias);
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  DFM_CHECK(x.ndim() == 4, "conv2d: input must be [N, C, H, W], got ",
            shape_str(x.shape()));
  DFM_CHECK(weight.ndim() == 4, "conv2d: weight must be [Co, C, kh, kw], got ",
            shape_str(weight.shape()));
  DFM_CHECK(weight.dim(1) == x.dim(1), "conv2d: input has ", x.dim(1),
            " channels but weight expects ", weight.dim(1));
  DFM_CHECK(weight.dim(2) % 2 == 1 && weight.dim(3) % 2 == 1,
            "conv2d: kernel extents must be odd, got ", shape_str(weight.shape()));
  DFM_CHECK(stride >= 1 && padding >= 0, "conv2d: stride ", stride, " padding ",
            padding);
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.co = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  DFM_CHECK(g.h + 2 * padding >= g.kh && g.w + 2 * padding >= g.kw,
            "conv2d: padded input ", shape_str(x.shape()), " smaller than kernel");
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
  if (bias.defined())
    DFM_CHECK(bias.numel() == g.co, "conv2d: bias size ", bias.numel(), " != ", g.co);

  const auto krows = g.c * g.kh * g.kw;
  const auto out_size = g.ho * g.wo;
  Tensor y(Shape{g.n, g.co, g.ho, g.wo});
  std::vector<double> cols(static_cast<std::size_t>(krows * out_size));
  ConstMatMap wm(weight.ptr(), g.co, krows);
  for (std::int64_t b = 0; b < g.n; ++b) {
    im2col(x.ptr() + b * g.c * g.h * g.w, g, cols.data());
    ConstMatMap cm(cols.data(), krows, out_size);
    MatMap ym(y.ptr() + b * g.co * out_size, g.co, out_size);
    ym.noalias() = wm * cm;
    if (bias.defined())
      for (std::int64_t o = 0; o < g.co; ++o) ym.row(o).array() += bias[o];
  }
  if (auto* tape = Tape::recording({&x, &weight, &bias})) {
    tape->record("conv2d", y, [x, weight, bias, y, g, krows, out_size]() mutable {
      const double* gy = y.grad().data();
      ConstMatMap wm(weight.ptr(), g.co, krows);
      std::vector<double> cols(static_cast<std::size_t>(krows * out_size));
      for (std::int64_t b = 0; b < g.n; ++b) {
        ConstMatMap gym(gy + b * g.co * out_size, g.co, out_size);
        if (weight.requires_grad()) {
          im2col(x.ptr() + b * g.c * g.h * g.w, g, cols.data());
          ConstMatMap cm(cols.data(), krows, out_size);
          MatMap gwm(weight.mutable_grad().data(), g.co, krows);
          gwm.noalias() += gym * cm.transpose();
        }
        if (x.requires_grad()) {
          MatMap dcols(cols.data(), krows, out_size);
          dcols.noalias() = wm.transpose() * gym;
          col2im_add(cols.data(), g, x.mutable_grad().data() + b * g.c * g.h * g.w);
        }
        if (bias.defined() && bias.requires_grad()) {
          auto gb = bias.mutable_grad();
          for (std::int64_t o = 0; o < g.co; ++o) gb[o] += gym.row(o).sum();
        }
      }
    });
  }
  return y;
}

Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& weight,
                               const Tensor& bias) {
  DFM_CHECK(x.ndim() >= 2, "depthwise_causal_conv1d: input needs [N, C, ...]");
  const auto n = x.dim(0), c = x.dim(1);
  const auto len = x.numel() / (n * c);
  DFM_CHECK(weight.ndim() == 2 && weight.dim(0) == c,
            "depthwise_causal_conv1d: weight ", shape_str(weight.shape()),
            " does not match ", c, " channels");
  DFM_CHECK(bias.numel() == c, "depthwise_causal_conv1d: bias size mismatch");
  const auto k = weight.dim(1);
  Tensor y(x.shape());
  auto xv = x.data();
  auto wv = weight.data();
  auto bv = bias.data();
  auto yv = y.data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto base = (b * c + ch) * len;
      for (std::int64_t t = 0; t < len; ++t) {
        double acc = bv[ch];
        for (std::int64_t j = 0; j < k; ++j) {
          const auto src = t - (k - 1) + j;
          if (src >= 0) acc += wv[ch * k + j] * xv[base + src];
        }
        yv[base + t] = acc;
      }
    }
  if (auto* tape = Tape::recording({&x, &weight, &bias})) {
    tape->record("depthwise_causal_conv1d", y, [x, weight, bias, y, n, c, len, k]() mutable {
      auto gy = y.grad();
      auto xv = x.data();
      auto wv = weight.data();
      std::span<double> gx, gw, gb;
      if (x.requires_grad()) gx = x.mutable_grad();
      if (weight.requires_grad()) gw = weight.mutable_grad();
      if (bias.requires_grad()) gb = bias.mutable_grad();
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const auto base = (b * c + ch) * len;
          for (std::int64_t t = 0; t < len; ++t) {
            const double g = gy[base + t];
            if (!gb.empty()) gb[ch] += g;
            for (std::int64_t j = 0; j < k; ++j) {
              const auto src = t - (k - 1) + j;
              if (src < 0) continue;
              if (!gw.empty()) gw[ch * k + j] += g * xv[base + src];
              if (!gx.empty()) gx[base + src] += g * wv[ch * k + j];
            }
          }
        }
    });
  }
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  DFM_CHECK(x.ndim() == 4, "global_avg_pool: input must be [N, C, H, W]");
  const auto n = x.dim(0), c = x.dim(1);
  const auto sites = x.dim(2) * x.dim(3);
  Tensor y(Shape{n, c});
  auto xv = x.data();
  for (std::int64_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::int64_t s = 0; s < sites; ++s) acc += xv[i * sites + s];
    y[i] = acc / static_cast<double>(sites);
  }
  if (auto* tape = Tape::recording({&x})) {
    tape->record("global_avg_pool", y, [x, y, n, c, sites]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      const double inv = 1.0 / static_cast<double>(sites);
      for (std::int64_t i = 0; i < n * c; ++i)
        for (std::int64_t s = 0; s < sites; ++s) gx[i * sites + s] += gy[i] * inv;
    });
  }
  return y;
}

namespace {

struct ResizeTap {
  std::int64_t lo, hi;
  double frac;
};

std::vector<ResizeTap> resize_taps(std::int64_t in, std::int64_t out) {
  std::vector<ResizeTap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = std::max(0.0, (static_cast<double>(o) + 0.5) * ratio - 0.5);
    auto lo = std::min(static_cast<std::int64_t>(std::floor(src)), in - 1);
    auto hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  DFM_CHECK(x.ndim() == 4, "resize_bilinear: input must be [N, C, H, W]");
  DFM_CHECK(out_h >= 1 && out_w >= 1, "resize_bilinear: empty output");
  const auto nc = x.dim(0) * x.dim(1);
  const auto h = x.dim(2), w = x.dim(3);
  auto ty = resize_taps(h, out_h);
  auto tx = resize_taps(w, out_w);
  Tensor y(Shape{x.dim(0), x.dim(1), out_h, out_w});
  auto xv = x.data();
  auto yv = y.data();
  for (std::int64_t p = 0; p < nc; ++p)
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      const auto& a = ty[static_cast<std::size_t>(oy)];
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        const auto& b = tx[static_cast<std::size_t>(ox)];
        const double* src = xv.data() + p * h * w;
        const double top = (1 - b.frac) * src[a.lo * w + b.lo] + b.frac * src[a.lo * w + b.hi];
        const double bot = (1 - b.frac) * src[a.hi * w + b.lo] + b.frac * src[a.hi * w + b.hi];
        yv[(p * out_h + oy) * out_w + ox] = (1 - a.frac) * top + a.frac * bot;
      }
    }
  if (auto* tape = Tape::recording({&x})) {
    tape->record("resize_bilinear", y, [x, y, nc, h, w, out_h, out_w, ty, tx]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::int64_t p = 0; p < nc; ++p)
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
          const auto& a = ty[static_cast<std::size_t>(oy)];
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const auto& b = tx[static_cast<std::size_t>(ox)];
            const double g = gy[(p * out_h + oy) * out_w + ox];
            double* dst = gx.data() + p * h * w;
            dst[a.lo * w + b.lo] += g * (1 - a.frac) * (1 - b.frac);
            dst[a.lo * w + b.hi] += g * (1 - a.frac) * b.frac;
            dst[a.hi * w + b.lo] += g * a.frac * (1 - b.frac);
            dst[a.hi * w + b.hi] += g * a.frac * b.frac;
          }
        }
    });
  }
  return y;
}

}  // namespace dfm::ops
