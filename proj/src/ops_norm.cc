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

#include <algorithm>
#include <cmath>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/tape.h"

namespace dfm::ops {

Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma,
                           const Tensor& beta, double eps) {
  DFM_CHECK(x.ndim() >= 2, "layer_norm_channels: input needs [N, C, ...]");
  const auto n = x.dim(0), c = x.dim(1);
  const auto sites = x.numel() / (n * c);
  DFM_CHECK(gamma.numel() == c && beta.numel() == c,
            "layer_norm_channels: affine params must have ", c, " entries");
  Tensor y(x.shape());
  // Normalized values and per-site inverse std, kept for backward.
  auto xhat = std::make_shared<std::vector<double>>(x.data().begin(), x.data().end());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * sites));
  auto xv = x.data();
  auto gv = gamma.data(), bv = beta.data();
  auto yv = y.data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t s = 0; s < sites; ++s) {
      const auto base = b * c * sites + s;
      double mu = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) mu += xv[base + ch * sites];
      mu /= static_cast<double>(c);
      double var = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double d = xv[base + ch * sites] - mu;
        var += d * d;
      }
      var /= static_cast<double>(c);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<std::size_t>(b * sites + s)] = is;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto i = base + ch * sites;
        const double h = (xv[i] - mu) * is;
        (*xhat)[static_cast<std::size_t>(i)] = h;
        yv[i] = gv[ch] * h + bv[ch];
      }
    }
  if (auto* tape = Tape::recording({&x, &gamma, &beta})) {
    tape->record("layer_norm_channels", y,
                 [x, gamma, beta, y, xhat, inv_std, n, c, sites]() mutable {
      auto gy = y.grad();
      auto gv = gamma.data();
      const auto& h = *xhat;
      std::span<double> gx, gg, gb;
      if (x.requires_grad()) gx = x.mutable_grad();
      if (gamma.requires_grad()) gg = gamma.mutable_grad();
      if (beta.requires_grad()) gb = beta.mutable_grad();
      const double inv_c = 1.0 / static_cast<double>(c);
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t s = 0; s < sites; ++s) {
          const auto base = b * c * sites + s;
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const auto i = static_cast<std::size_t>(base + ch * sites);
            const double dh = gy[i] * gv[ch];
            mean_dh += dh;
            mean_dh_h += dh * h[i];
            if (!gg.empty()) gg[ch] += gy[i] * h[i];
            if (!gb.empty()) gb[ch] += gy[i];
          }
          if (gx.empty()) continue;
          mean_dh *= inv_c;
          mean_dh_h *= inv_c;
          const double is = (*inv_std)[static_cast<std::size_t>(b * sites + s)];
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const auto i = static_cast<std::size_t>(base + ch * sites);
            gx[i] += is * (gy[i] * gv[ch] - mean_dh - h[i] * mean_dh_h);
          }
        }
    });
  }
  return y;
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    BatchNormState& state, bool training) {
  DFM_CHECK(x.ndim() == 4, "batch_norm2d: input must be [N, C, H, W]");
  const auto n = x.dim(0), c = x.dim(1);
  const auto sites = x.dim(2) * x.dim(3);
  DFM_CHECK(gamma.numel() == c && beta.numel() == c,
            "batch_norm2d: affine params must have ", c, " entries");
  DFM_CHECK(state.running_mean.numel() == c && state.running_var.numel() == c,
            "batch_norm2d: running statistics must have ", c, " entries");
  const auto count = n * sites;
  Tensor y(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.numel()));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c));
  auto xv = x.data();
  auto gv = gamma.data(), bv = beta.data();
  auto yv = y.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (training) {
      mu = 0.0;
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t s = 0; s < sites; ++s) mu += xv[(b * c + ch) * sites + s];
      mu /= static_cast<double>(count);
      var = 0.0;
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t s = 0; s < sites; ++s) {
          const double d = xv[(b * c + ch) * sites + s] - mu;
          var += d * d;
        }
      var /= static_cast<double>(count);
      const double unbiased =
          count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      state.running_mean[ch] = (1 - state.momentum) * state.running_mean[ch] + state.momentum * mu;
      state.running_var[ch] =
          (1 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    } else {
      mu = state.running_mean[ch];
      var = state.running_var[ch];
    }
    const double is = 1.0 / std::sqrt(var + state.eps);
    (*inv_std)[static_cast<std::size_t>(ch)] = is;
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t s = 0; s < sites; ++s) {
        const auto i = (b * c + ch) * sites + s;
        const double h = (xv[i] - mu) * is;
        (*xhat)[static_cast<std::size_t>(i)] = h;
        yv[i] = gv[ch] * h + bv[ch];
      }
  }
  if (auto* tape = Tape::recording({&x, &gamma, &beta})) {
    tape->record("batch_norm2d", y,
                 [x, gamma, beta, y, xhat, inv_std, n, c, sites, count, training]() mutable {
      auto gy = y.grad();
      auto gv = gamma.data();
      const auto& h = *xhat;
      std::span<double> gx, gg, gb;
      if (x.requires_grad()) gx = x.mutable_grad();
      if (gamma.requires_grad()) gg = gamma.mutable_grad();
      if (beta.requires_grad()) gb = beta.mutable_grad();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double sum_dh = 0.0, sum_dh_h = 0.0;
        for (std::int64_t b = 0; b < n; ++b)
          for (std::int64_t s = 0; s < sites; ++s) {
            const auto i = static_cast<std::size_t>((b * c + ch) * sites + s);
            const double dh = gy[i] * gv[ch];
            sum_dh += dh;
            sum_dh_h += dh * h[i];
            if (!gg.empty()) gg[ch] += gy[i] * h[i];
            if (!gb.empty()) gb[ch] += gy[i];
          }
        if (gx.empty()) continue;
        const double is = (*inv_std)[static_cast<std::size_t>(ch)];
        const double inv_count = 1.0 / static_cast<double>(count);
        for (std::int64_t b = 0; b < n; ++b)
          for (std::int64_t s = 0; s < sites; ++s) {
            const auto i = static_cast<std::size_t>((b * c + ch) * sites + s);
            const double dh = gy[i] * gv[ch];
            if (training)
              gx[i] += is * (dh - sum_dh * inv_count - h[i] * sum_dh_h * inv_count);
            else
              gx[i] += is * dh;
          }
      }
    });
  }
  return y;
}

Tensor log_softmax_spatial(const Tensor& x) {
  DFM_CHECK(x.ndim() == 4, "log_softmax_spatial: input must be [N, J, H, W]");
  const auto maps = x.dim(0) * x.dim(1);
  const auto sites = x.dim(2) * x.dim(3);
  Tensor y(x.shape());
  auto xv = x.data();
  auto yv = y.data();
  for (std::int64_t m = 0; m < maps; ++m) {
    const double* src = xv.data() + m * sites;
    const double mx = *std::max_element(src, src + sites);
    double acc = 0.0;
    for (std::int64_t s = 0; s < sites; ++s) acc += std::exp(src[s] - mx);
    const double lse = mx + std::log(acc);
    for (std::int64_t s = 0; s < sites; ++s) yv[m * sites + s] = src[s] - lse;
  }
  if (auto* tape = Tape::recording({&x})) {
    tape->record("log_softmax_spatial", y, [x, y, maps, sites]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      auto yv = y.data();
      for (std::int64_t m = 0; m < maps; ++m) {
        double total = 0.0;
        for (std::int64_t s = 0; s < sites; ++s) total += gy[m * sites + s];
        for (std::int64_t s = 0; s < sites; ++s) {
          const auto i = m * sites + s;
          gx[i] += gy[i] - std::exp(yv[i]) * total;
        }
      }
    });
  }
  return y;
}

}  // namespace dfm::ops
