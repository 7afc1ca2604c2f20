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

// Differentiable primitives. Every function here records itself on the
// active Tape when one of its inputs requires grad. Feature maps use the
// [N, C, H, W] layout; a token sequence of length L = H*W is the row-major
// flattening of the spatial grid, which is exactly the sweep scan order.

#pragma once

#include <array>
#include <span>
#include <vector>

#include "dfm/tensor.h"

namespace dfm::ops {

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& x);
// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum of a * b over all elements, with b treated as a constant.
Tensor dot_const(const Tensor& a, const Tensor& b);

// Copies `x` into a new tensor of the given shape (recorded, unlike
// Tensor::reshaped which aliases).
Tensor reshape(const Tensor& x, Shape shape);
// Concatenates flattened per-sample features: each input is [N, ...];
// output is [N, sum of per-sample sizes].
Tensor concat_flat(std::span<const Tensor> xs);
// Selects rows [begin, end) of axis 1 from an [N, C, ...] tensor.
Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t end);

// ---- dense / convolution ---------------------------------------------------

// x [N, C, H, W] (* means zero or more spatial axes), weight [Co, C],
// bias [Co] or undefined. Applies the same linear map at every site.
Tensor linear_channels(const Tensor& x, const Tensor& weight, const Tensor& bias);
// x [N, C], weight [Co, C], bias [Co] or undefined -> [N, Co].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Cross-correlation, no kernel flip. x [N, C, H, W], weight [Co, C, kh, kw],
// bias [Co] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// Depthwise causal 1D convolution over the sweep-serialized tokens of
// x [N, C, H, W]: y[t] = bias + sum_j w[j] * x[t - (k-1) + j], zero history.
// weight [C, k], bias [C].
Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& weight,
                               const Tensor& bias);

// x [N, C, H, W] -> [N, C].
Tensor global_avg_pool(const Tensor& x);

// Bilinear resize with half-pixel centers (align_corners = false).
Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

// ---- normalization ---------------------------------------------------------

// Normalizes over C at every (n, h, w) site. gamma/beta [C].
Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma,
                           const Tensor& beta, double eps = 1e-6);

struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double momentum = 0.1;
  double eps = 1e-5;
};

// 2D batch normalization. In training mode the batch statistics over
// (N, H, W) are used and `state` is updated in place; otherwise the running
// statistics are used.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    BatchNormState& state, bool training);

// Log-softmax over the trailing spatial axes of x [N, J, H, W], per (n, j).
Tensor log_softmax_spatial(const Tensor& x);

// ---- sequence / sampling ---------------------------------------------------

// Layout of an operand of the fused scan. Element (n, c, s, t) lives at
// n * batch + c * channel + s * state + t * time; a zero stride broadcasts.
struct ScanStrides {
  std::int64_t batch = 0;
  std::int64_t channel = 0;
  std::int64_t state = 0;
  std::int64_t time = 0;
};

// Fused zero-order-hold state-space scan over L tokens, per batch item n
// and channel c (state size S):
//   abar = exp(delta * A),  bbar = (exp(delta * A) - 1) / A * B
//   h[t] = abar * h[t-1] + bbar * u_state[t],  h[0 - 1] = 0
//   y[t] = sum_s C[s] h_s[t] + D * u_skip[t]
// u_state, u_skip, delta: [N, C, L-shaped...] contiguous with numel N*C*L.
// A: [C, S]. B, Cm: arbitrary tensors addressed through their strides.
// D: [C].
struct ScanOperands {
  Tensor u_state;
  Tensor u_skip;
  Tensor delta;
  ScanStrides delta_strides;
  Tensor A;
  Tensor B;
  ScanStrides b_strides;
  Tensor C;
  ScanStrides c_strides;
  Tensor D;
};
Tensor state_space_scan(const ScanOperands& in, std::int64_t batch,
                        std::int64_t channels, std::int64_t length,
                        std::int64_t state);

// Samples map [C, H, W] at the 1-based point (x, y) = (column, row), so
// (i, j) on the grid returns map[:, j-1, i-1]. Bilinear in the four
// neighbouring cells; cells off the grid contribute zero.
Tensor bilinear_sample(const Tensor& map, double x, double y);

// Deformable input aggregation over a whole feature map.
// x [N, C, H, W]; offsets [N, K, 2, H, W] ((dx, dy) per anchor and site);
// weights [N, K, H, W]; anchors: K integer (dx, dy) pairs. Returns
// out[n, :, y, x] = sum_k w_k * bilinear(x[n], (x + ax_k + dx_k, y + ay_k + dy_k))
// with zero padding outside the grid.
Tensor deformable_aggregate(const Tensor& x, const Tensor& offsets,
                            const Tensor& weights,
                            std::span<const std::array<int, 2>> anchors);

}  // namespace dfm::ops
