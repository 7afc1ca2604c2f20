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

// Deformable state-space scan. The state update at scan position p_t reads
// a weighted sum of bilinear samples x(p_t + a_k + o_{k,t}) around K fixed
// anchors a_k, with offsets o and weights b predicted from the token x(p_t);
// the output skip still reads the undisplaced token.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "dfm/grad_check.h"
#include "dfm/ssm.h"
#include "dfm/tensor.h"

namespace dfm {

enum class AnchorVariant { K1, K9, K25 };

// Maps 1, 9 or 25 to the variant; ContractViolation otherwise.
AnchorVariant anchor_variant_from_count(int count);
int anchor_count(AnchorVariant variant);

struct AnchorGrid {
  // (dx, dy) integer displacements, row-major over dy then dx.
  std::vector<std::array<int, 2>> anchors;
  std::int64_t size() const { return static_cast<std::int64_t>(anchors.size()); }
};

// K1: {(0,0)}; K9: {-1,0,1}^2; K25: {-2..2}^2.
AnchorGrid anchor_grid(AnchorVariant variant);

struct DeformableScanConfig {
  AnchorGrid anchors;
  Tensor offset_weight;  // [2K, d]; row 2k is dx of anchor k, 2k+1 is dy
  Tensor offset_bias;    // [2K]
  Tensor weight_weight;  // [K, d]
  Tensor weight_bias;    // [K]

  // Offset predictor all zeros, weight predictor weights zero and bias 1/K:
  // the scan starts as an unweighted local average with no displacement.
  static DeformableScanConfig init(AnchorVariant variant, std::int64_t channels);
  std::int64_t channels() const { return offset_weight.dim(1); }
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

struct OffsetsAndWeights {
  Tensor offsets;  // [K, 2]
  Tensor weights;  // [K]
};

// Offsets and anchor weights for one token x_t [d].
OffsetsAndWeights predict_offsets_weights(const Tensor& x_t,
                                          const DeformableScanConfig& cfg);

// Input term of the state update at one 1-based grid position:
// sum_k b_k * x(p_t + a_k + o_k) over X [d, H, W], zero outside the grid.
Tensor deformable_aggregate(const Tensor& X, GridPos p_t, const Tensor& offsets,
                            const Tensor& weights, const AnchorGrid& anchors);

// Scalar displacement predictor for sequences: delta_t = w . x(t) + bias.
struct OffsetPredictor1d {
  Tensor weight;  // [d]
  Tensor bias;    // [1]
  static OffsetPredictor1d zeros(std::int64_t channels);
};

// One-dimensional deformable scan over x [d, s] with the static parameters
// of `params`: the state update reads x(t + delta_t) by linear interpolation
// (zero outside the sequence); the D skip reads x(t).
Tensor dssm_scan_1d(const SsmParams& params, const Tensor& x,
                    const OffsetPredictor1d& predictor);

// Two-dimensional deformable scan over X [d, H, W] or [N, d, H, W] in sweep
// order. Uses predicted per-token B, C, delta when `selective` is set, the
// static parameters otherwise. Output has the shape of X.
Tensor dssm_scan_2d(const Tensor& X, const DeformableScanConfig& cfg,
                    const SsmParams& ssm, bool selective);

}  // namespace dfm
