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
#include <memory>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/ssm.h"
#include "dfm/tape.h"

namespace dfm {

double zoh_input_gain(double x) {
  if (std::fabs(x) < kZohSeriesThreshold) return 1.0 + 0.5 * x;
  return std::expm1(x) / x;
}

double zoh_input_gain_derivative(double x) {
  if (std::fabs(x) < 1e-3) {
    return 0.5 + x * (1.0 / 3.0 + x * (1.0 / 8.0 + x * (1.0 / 30.0 + x / 144.0)));
  }
  return (x * std::exp(x) - std::expm1(x)) / (x * x);
}

namespace ops {

namespace {

inline std::int64_t at(const ScanStrides& s, std::int64_t n, std::int64_t c,
                       std::int64_t k, std::int64_t t) {
  return n * s.batch + c * s.channel + k * s.state + t * s.time;
}

void check_addressable(const Tensor& t, const ScanStrides& s, std::int64_t n,
                       std::int64_t c, std::int64_t k, std::int64_t l,
                       const char* what) {
  const auto last = at(s, n - 1, c - 1, k - 1, l - 1);
  DFM_CHECK(last < t.numel() && s.batch >= 0 && s.channel >= 0 && s.state >= 0 &&
                s.time >= 0,
            "state_space_scan: operand ", what, " of shape ", shape_str(t.shape()),
            " is too small for its strides");
}

}  // namespace

Tensor state_space_scan(const ScanOperands& in, std::int64_t batch,
                        std::int64_t channels, std::int64_t length,
                        std::int64_t state) {
  const auto tokens = batch * channels * length;
  DFM_CHECK(batch >= 1 && channels >= 1 && length >= 1 && state >= 1,
            "state_space_scan: empty problem");
  DFM_CHECK(in.u_state.numel() == tokens && in.u_skip.numel() == tokens,
            "state_space_scan: inputs must hold N*C*L = ", tokens, " values, got ",
            in.u_state.numel(), " and ", in.u_skip.numel());
  DFM_CHECK(in.A.numel() == channels * state, "state_space_scan: A must be [C, S]");
  DFM_CHECK(in.D.numel() == channels, "state_space_scan: D must be [C]");
  check_addressable(in.delta, in.delta_strides, batch, channels, 1, length, "delta");
  check_addressable(in.B, in.b_strides, batch, channels, state, length, "B");
  check_addressable(in.C, in.c_strides, batch, channels, state, length, "C");

  Tensor y(in.u_skip.shape());
  // Hidden states for every step: [N, C, L, S].
  auto hs = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(tokens * state));
  {
    auto u = in.u_state.data(), us = in.u_skip.data();
    auto dl = in.delta.data(), a = in.A.data(), bm = in.B.data(), cm = in.C.data();
    auto d = in.D.data();
    auto yv = y.data();
    std::vector<double> h(static_cast<std::size_t>(state));
    for (std::int64_t n = 0; n < batch; ++n)
      for (std::int64_t c = 0; c < channels; ++c) {
        std::fill(h.begin(), h.end(), 0.0);
        const auto row = (n * channels + c) * length;
        for (std::int64_t t = 0; t < length; ++t) {
          const double dt = dl[at(in.delta_strides, n, c, 0, t)];
          const double ut = u[row + t];
          double acc = 0.0;
          double* hsave = hs->data() + (row + t) * state;
          for (std::int64_t k = 0; k < state; ++k) {
            const double x = dt * a[c * state + k];
            const double abar = std::exp(x);
            const double bbar = dt * zoh_input_gain(x) * bm[at(in.b_strides, n, c, k, t)];
            auto& hk = h[static_cast<std::size_t>(k)];
            hk = abar * hk + bbar * ut;
            hsave[k] = hk;
            acc += cm[at(in.c_strides, n, c, k, t)] * hk;
          }
          yv[row + t] = acc + d[c] * us[row + t];
        }
      }
  }

  if (auto* tape = Tape::recording(
          {&in.u_state, &in.u_skip, &in.delta, &in.A, &in.B, &in.C, &in.D})) {
    tape->record("state_space_scan", y,
                 [in, y, hs, batch, channels, length, state]() mutable {
      auto gy = y.grad();
      auto u = in.u_state.data(), us = in.u_skip.data();
      auto dl = in.delta.data(), a = in.A.data(), bm = in.B.data(), cm = in.C.data();
      auto d = in.D.data();
      auto grad_of = [](const Tensor& t) {
        return t.requires_grad() ? t.mutable_grad() : std::span<double>{};
      };
      auto gu = grad_of(in.u_state), gus = grad_of(in.u_skip), gdl = grad_of(in.delta);
      auto ga = grad_of(in.A), gb = grad_of(in.B), gc = grad_of(in.C), gd = grad_of(in.D);
      std::vector<double> carry(static_cast<std::size_t>(state));
      for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t c = 0; c < channels; ++c) {
          std::fill(carry.begin(), carry.end(), 0.0);
          const auto row = (n * channels + c) * length;
          for (std::int64_t t = length; t-- > 0;) {
            const double g = gy[row + t];
            if (!gus.empty()) gus[row + t] += g * d[c];
            if (!gd.empty()) gd[c] += g * us[row + t];
            const auto di = at(in.delta_strides, n, c, 0, t);
            const double dt = dl[di];
            const double ut = u[row + t];
            const double* hcur = hs->data() + (row + t) * state;
            const double* hprev = t > 0 ? hcur - state : nullptr;
            double du = 0.0, ddt = 0.0;
            for (std::int64_t k = 0; k < state; ++k) {
              const auto ci = at(in.c_strides, n, c, k, t);
              const auto bi = at(in.b_strides, n, c, k, t);
              const auto kk = static_cast<std::size_t>(k);
              const double dh = carry[kk] + g * cm[ci];
              if (!gc.empty()) gc[ci] += g * hcur[k];
              const double ak = a[c * state + k];
              const double x = dt * ak;
              const double abar = std::exp(x);
              const double gain = dt * zoh_input_gain(x);
              const double dabar = hprev ? dh * hprev[k] : 0.0;
              const double dbbar = dh * ut;
              du += dh * gain * bm[bi];
              if (!gb.empty()) gb[bi] += dbbar * gain;
              const double dgain = dbbar * bm[bi];
              // d abar/d dt = A abar, d gain/d dt = abar,
              // d abar/dA = dt abar, d gain/dA = dt^2 psi'(dt A).
              ddt += dabar * ak * abar + dgain * abar;
              if (!ga.empty())
                ga[c * state + k] +=
                    dabar * dt * abar + dgain * dt * dt * zoh_input_gain_derivative(x);
              carry[kk] = dh * abar;
            }
            if (!gu.empty()) gu[row + t] += du;
            if (!gdl.empty()) gdl[di] += ddt;
          }
        }
    });
  }
  return y;
}

}  // namespace ops
}  // namespace dfm
