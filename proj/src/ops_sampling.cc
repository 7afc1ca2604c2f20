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

#include <cmath>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/tape.h"

namespace dfm::ops {

namespace {

// Four-corner stencil at a 0-based (column, row) position. Corners outside
// the grid get index -1 and contribute nothing.
struct Stencil {
  std::int64_t idx[4];    // (y0,x0) (y0,x1) (y1,x0) (y1,x1)
  double weight[4];
  double fx, fy;
};

Stencil make_stencil(double px, double py, std::int64_t h, std::int64_t w) {
  Stencil s{};
  const double fx0 = std::floor(px), fy0 = std::floor(py);
  s.fx = px - fx0;
  s.fy = py - fy0;
  // Far-away points: every corner is off-grid. Guard before the integer cast.
  const bool far = !(fx0 > -2.0 && fx0 < static_cast<double>(w) + 1.0 &&
                     fy0 > -2.0 && fy0 < static_cast<double>(h) + 1.0);
  const auto x0 = far ? -2 : static_cast<std::int64_t>(fx0);
  const auto y0 = far ? -2 : static_cast<std::int64_t>(fy0);
  const std::int64_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const std::int64_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const double wts[4] = {(1 - s.fy) * (1 - s.fx), (1 - s.fy) * s.fx,
                         s.fy * (1 - s.fx), s.fy * s.fx};
  for (int i = 0; i < 4; ++i) {
    const bool inside = !far && xs[i] >= 0 && xs[i] < w && ys[i] >= 0 && ys[i] < h;
    s.idx[i] = inside ? ys[i] * w + xs[i] : -1;
    s.weight[i] = wts[i];
  }
  return s;
}

inline double corner(const double* plane, std::int64_t idx) {
  return idx >= 0 ? plane[idx] : 0.0;
}

inline double sample(const double* plane, const Stencil& s) {
  double v = 0.0;
  for (int i = 0; i < 4; ++i) v += s.weight[i] * corner(plane, s.idx[i]);
  return v;
}

// d sample / d px and d sample / d py.
inline void sample_slope(const double* plane, const Stencil& s, double& dx,
                         double& dy) {
  const double v00 = corner(plane, s.idx[0]), v01 = corner(plane, s.idx[1]);
  const double v10 = corner(plane, s.idx[2]), v11 = corner(plane, s.idx[3]);
  dx = (1 - s.fy) * (v01 - v00) + s.fy * (v11 - v10);
  dy = (1 - s.fx) * (v10 - v00) + s.fx * (v11 - v01);
}

}  // namespace

Tensor bilinear_sample(const Tensor& map, double x, double y) {
  DFM_CHECK(map.ndim() == 3, "bilinear_sample: map must be [C, H, W], got ",
            shape_str(map.shape()));
  const auto c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const auto st = make_stencil(x - 1.0, y - 1.0, h, w);
  Tensor out(Shape{c});
  for (std::int64_t ch = 0; ch < c; ++ch) out[ch] = sample(map.ptr() + ch * h * w, st);
  if (auto* tape = Tape::recording({&map})) {
    tape->record("bilinear_sample", out, [map, out, st, c, h, w]() mutable {
      auto g = out.grad();
      auto gm = map.mutable_grad();
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (int i = 0; i < 4; ++i)
          if (st.idx[i] >= 0) gm[ch * h * w + st.idx[i]] += g[ch] * st.weight[i];
    });
  }
  return out;
}

Tensor deformable_aggregate(const Tensor& x, const Tensor& offsets,
                            const Tensor& weights,
                            std::span<const std::array<int, 2>> anchors) {
  DFM_CHECK(x.ndim() == 4, "deformable_aggregate: input must be [N, C, H, W]");
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto k = static_cast<std::int64_t>(anchors.size());
  DFM_CHECK(k >= 1, "deformable_aggregate: no anchors");
  DFM_CHECK(offsets.shape() == (Shape{n, k, 2, h, w}),
            "deformable_aggregate: offsets must be ", shape_str({n, k, 2, h, w}),
            ", got ", shape_str(offsets.shape()));
  DFM_CHECK(weights.shape() == (Shape{n, k, h, w}),
            "deformable_aggregate: weights must be ", shape_str({n, k, h, w}),
            ", got ", shape_str(weights.shape()));
  const auto plane = h * w;
  std::vector<std::array<int, 2>> anchor_list(anchors.begin(), anchors.end());

  // One stencil per (n, k, site), shared by all channels.
  auto stencils = std::make_shared<std::vector<Stencil>>(
      static_cast<std::size_t>(n * k * plane));
  auto ov = offsets.data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t a = 0; a < k; ++a)
      for (std::int64_t py = 0; py < h; ++py)
        for (std::int64_t px = 0; px < w; ++px) {
          const auto site = py * w + px;
          const double dx = ov[((b * k + a) * 2 + 0) * plane + site];
          const double dy = ov[((b * k + a) * 2 + 1) * plane + site];
          (*stencils)[static_cast<std::size_t>((b * k + a) * plane + site)] =
              make_stencil(static_cast<double>(px + anchor_list[a][0]) + dx,
                           static_cast<double>(py + anchor_list[a][1]) + dy, h, w);
        }

  Tensor y(x.shape());
  auto xv = x.data();
  auto wv = weights.data();
  auto yv = y.data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t a = 0; a < k; ++a)
      for (std::int64_t site = 0; site < plane; ++site) {
        const auto& st = (*stencils)[static_cast<std::size_t>((b * k + a) * plane + site)];
        const double wk = wv[(b * k + a) * plane + site];
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const auto base = (b * c + ch) * plane;
          yv[base + site] += wk * sample(xv.data() + base, st);
        }
      }

  if (auto* tape = Tape::recording({&x, &offsets, &weights})) {
    tape->record("deformable_aggregate", y,
                 [x, offsets, weights, y, stencils, n, c, k, plane]() mutable {
      auto gy = y.grad();
      auto xv = x.data();
      auto wv = weights.data();
      std::span<double> gx, go, gw;
      if (x.requires_grad()) gx = x.mutable_grad();
      if (offsets.requires_grad()) go = offsets.mutable_grad();
      if (weights.requires_grad()) gw = weights.mutable_grad();
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t a = 0; a < k; ++a)
          for (std::int64_t site = 0; site < plane; ++site) {
            const auto& st =
                (*stencils)[static_cast<std::size_t>((b * k + a) * plane + site)];
            const auto wi = (b * k + a) * plane + site;
            const double wk = wv[wi];
            double dweight = 0.0, doff_x = 0.0, doff_y = 0.0;
            for (std::int64_t ch = 0; ch < c; ++ch) {
              const auto base = (b * c + ch) * plane;
              const double g = gy[base + site];
              if (g == 0.0) continue;
              const double* src = xv.data() + base;
              if (!gw.empty()) dweight += g * sample(src, st);
              if (!go.empty()) {
                double sx, sy;
                sample_slope(src, st, sx, sy);
                doff_x += g * wk * sx;
                doff_y += g * wk * sy;
              }
              if (!gx.empty())
                for (int i = 0; i < 4; ++i)
                  if (st.idx[i] >= 0) gx[base + st.idx[i]] += g * wk * st.weight[i];
            }
            if (!gw.empty()) gw[wi] += dweight;
            if (!go.empty()) {
              go[((b * k + a) * 2 + 0) * plane + site] += doff_x;
              go[((b * k + a) * 2 + 1) * plane + site] += doff_y;
            }
          }
    });
  }
  return y;
}

}  // namespace dfm::ops
