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

// State-space machinery: zero-order-hold discretization, the sequential
// recurrence, its global-convolution dual, input-dependent (selective)
// parameters, and the sweep serialization of 2D grids.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dfm/grad_check.h"
#include "dfm/tensor.h"

namespace dfm {

class Rng;

// Below this |dt * A| the input gain (exp(x) - 1) / x uses its series.
inline constexpr double kZohSeriesThreshold = 1e-8;

// (exp(x) - 1) / x, with the x -> 0 limit.
double zoh_input_gain(double x);
// d/dx of zoh_input_gain.
double zoh_input_gain_derivative(double x);

// Linear maps predicting per-token B, C and delta from the token itself.
struct SelectivePredictors {
  Tensor b_weight;      // [N, d]
  Tensor b_bias;        // [N]
  Tensor c_weight;      // [N, d]
  Tensor c_bias;        // [N]
  Tensor delta_weight;  // [d, d]
  Tensor delta_bias;    // [d]; softplus(delta_bias) in [1e-3, 1e-1] at init

  static SelectivePredictors init(std::int64_t channels, std::int64_t state, Rng& rng);
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

// Diagonal state-space parameters for d channels with state size N.
// A holds the diagonal transition of every channel; D is a per-channel skip.
struct SsmParams {
  Tensor A;      // [d, N]
  Tensor B;      // [N, d]
  Tensor C;      // [d, N]
  Tensor D;      // [d]
  Tensor delta;  // [d], positive
  std::optional<SelectivePredictors> selective;

  std::int64_t channels() const { return A.dim(0); }
  std::int64_t state_size() const { return A.dim(1); }

  // A = -(1..N) per channel, small random B/C, D = 1, delta log-uniform in
  // [1e-3, 1e-1].
  static SsmParams init(std::int64_t channels, std::int64_t state, Rng& rng,
                        bool with_selective = false);
  void validate() const;
};

// Zero-order-hold discretization. Time-invariant: a_bar [d, N], b_bar [N, d].
// Time-varying (selective): a_bar [s, d, N], b_bar [s, N, d].
struct DiscreteSsm {
  Tensor a_bar;
  Tensor b_bar;
  bool time_varying = false;

  std::int64_t channels() const;
  std::int64_t state_size() const;
};

DiscreteSsm discretize_zoh(const SsmParams& params);
// Per-token discretization: A [d, N], B_t [N, s], delta_t [d, s].
DiscreteSsm discretize_zoh_selective(const Tensor& A, const Tensor& b_tokens,
                                     const Tensor& delta_tokens);

// Sequential recurrence with h(0) = 0 over x [d, s]:
//   h(t) = a_bar h(t-1) + b_bar x(t),  y(t) = C h(t) + D x(t).
// C is [d, N] for a time-invariant system or [N, s] per token otherwise.
Tensor ssm_scan(const DiscreteSsm& disc, const Tensor& C, const Tensor& D,
                const Tensor& x);

// Global convolution kernel K[c, t] = C A_bar^t B_bar, t = 0..s-1.
// Throws UnsupportedMode for a time-varying system.
Tensor ssm_kernel(const DiscreteSsm& disc, const Tensor& C, std::int64_t length);

// Causal convolution of x [d, s] with per-channel kernel K [d, s] plus the
// D skip: y[c, t] = sum_{j <= t} K[c, j] x[c, t - j] + D[c] x[c, t].
Tensor causal_conv_form(const Tensor& kernel, const Tensor& D, const Tensor& x);

// Per-token parameters for x [N, d, L...] (any trailing token layout):
// B and C are [N, S, L...], delta is [N, d, L...] after softplus.
struct SelectiveParams {
  Tensor B;
  Tensor C;
  Tensor delta;
};
SelectiveParams selective_params(const Tensor& x, const SelectivePredictors& predictors);

// Runs the scan over the tokens of x [N, d, H, W] (sweep order) with either
// the static parameters or, when `selective` is set, the predicted ones.
// `state_input` replaces x in the state update when defined (the D skip
// always uses x). Differentiable through every operand.
Tensor apply_ssm(const Tensor& x, const SsmParams& params, bool selective,
                 const Tensor& state_input = Tensor());

// 1-based grid position: x is the column, y the row.
struct GridPos {
  std::int64_t x = 0;
  std::int64_t y = 0;
  bool operator==(const GridPos&) const = default;
};

struct ScanOrder {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<GridPos> positions;  // positions[t - 1] = p_t

  // Inverse of the serialization: the 1-based t with p_t == pos.
  std::int64_t index_of(GridPos pos) const;
};

// p_t = (mod(t - 1, W) + 1, floor((t - 1) / W) + 1), t = 1..HW.
ScanOrder sweep_positions(std::int64_t height, std::int64_t width);

}  // namespace dfm
