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

#include "dfm/dssm.h"

#include "dfm/error.h"
#include "dfm/ops.h"

namespace dfm {

AnchorVariant anchor_variant_from_count(int count) {
  switch (count) {
    case 1:
      return AnchorVariant::K1;
    case 9:
      return AnchorVariant::K9;
    case 25:
      return AnchorVariant::K25;
  }
  throw ContractViolation("anchor count must be 1, 9 or 25, got " +
                          std::to_string(count));
}

int anchor_count(AnchorVariant variant) {
  switch (variant) {
    case AnchorVariant::K1:
      return 1;
    case AnchorVariant::K9:
      return 9;
    case AnchorVariant::K25:
      return 25;
  }
  return 0;
}

AnchorGrid anchor_grid(AnchorVariant variant) {
  int radius = 0;
  if (variant == AnchorVariant::K9) radius = 1;
  if (variant == AnchorVariant::K25) radius = 2;
  AnchorGrid grid;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) grid.anchors.push_back({dx, dy});
  return grid;
}

DeformableScanConfig DeformableScanConfig::init(AnchorVariant variant,
                                                std::int64_t channels) {
  DeformableScanConfig cfg;
  cfg.anchors = anchor_grid(variant);
  const auto k = cfg.anchors.size();
  cfg.offset_weight = Tensor::zeros({2 * k, channels});
  cfg.offset_bias = Tensor::zeros({2 * k});
  cfg.weight_weight = Tensor::zeros({k, channels});
  cfg.weight_bias = Tensor({k}, 1.0 / static_cast<double>(k));
  return cfg;
}

std::vector<NamedTensor> DeformableScanConfig::named(const std::string& prefix) const {
  return {{prefix + "offset_weight", offset_weight},
          {prefix + "offset_bias", offset_bias},
          {prefix + "weight_weight", weight_weight},
          {prefix + "weight_bias", weight_bias}};
}

OffsetsAndWeights predict_offsets_weights(const Tensor& x_t,
                                          const DeformableScanConfig& cfg) {
  const auto d = cfg.channels(), k = cfg.anchors.size();
  DFM_CHECK(x_t.numel() == d, "predict_offsets_weights: token has ", x_t.numel(),
            " channels, predictor expects ", d);
  Tensor token = x_t.reshaped({1, d});
  OffsetsAndWeights out;
  out.offsets =
      ops::linear(token, cfg.offset_weight, cfg.offset_bias).reshaped({k, 2});
  out.weights = ops::linear(token, cfg.weight_weight, cfg.weight_bias).reshaped({k});
  return out;
}

Tensor deformable_aggregate(const Tensor& X, GridPos p_t, const Tensor& offsets,
                            const Tensor& weights, const AnchorGrid& anchors) {
  DFM_CHECK(X.ndim() == 3, "deformable_aggregate: X must be [d, H, W]");
  const auto k = anchors.size();
  DFM_CHECK(offsets.shape() == (Shape{k, 2}) && weights.numel() == k,
            "deformable_aggregate: expected offsets [", k, ", 2] and ", k, " weights");
  DFM_CHECK(p_t.x >= 1 && p_t.x <= X.dim(2) && p_t.y >= 1 && p_t.y <= X.dim(1),
            "deformable_aggregate: p_t off the grid");
  Tensor acc({X.dim(0)});
  for (std::int64_t a = 0; a < k; ++a) {
    const auto& anchor = anchors.anchors[static_cast<std::size_t>(a)];
    const double qx = static_cast<double>(p_t.x + anchor[0]) + offsets.at({a, 0});
    const double qy = static_cast<double>(p_t.y + anchor[1]) + offsets.at({a, 1});
    Tensor s = ops::bilinear_sample(X, qx, qy);
    acc = ops::add(acc, ops::scale(s, weights[a]));
  }
  return acc;
}

OffsetPredictor1d OffsetPredictor1d::zeros(std::int64_t channels) {
  return {Tensor::zeros({channels}), Tensor::zeros({1})};
}

Tensor dssm_scan_1d(const SsmParams& params, const Tensor& x,
                    const OffsetPredictor1d& predictor) {
  DFM_CHECK(x.ndim() == 2, "dssm_scan_1d: x must be [d, s]");
  const auto d = x.dim(0), s = x.dim(1);
  DFM_CHECK(predictor.weight.numel() == d && predictor.bias.numel() == 1,
            "dssm_scan_1d: predictor must be [", d, "] plus a scalar bias");
  // A sequence is a 1 x s grid; the displacement is along the column axis.
  Tensor grid = x.reshaped({1, d, 1, s});
  Tensor shift = ops::linear_channels(grid, predictor.weight.reshaped({1, d}),
                                      predictor.bias);  // [1, 1, 1, s]
  Tensor zero_rows = Tensor::zeros({1, s});
  const Tensor parts[] = {shift.reshaped({1, s}), zero_rows};
  Tensor offsets = ops::concat_flat(parts).reshaped({1, 1, 2, 1, s});
  Tensor weights = Tensor::ones({1, 1, 1, s});
  const std::array<int, 2> origin[] = {{0, 0}};
  Tensor sampled = ops::deformable_aggregate(grid, offsets, weights, origin);
  return apply_ssm(grid, params, false, sampled).reshaped({d, s});
}

Tensor dssm_scan_2d(const Tensor& X, const DeformableScanConfig& cfg,
                    const SsmParams& ssm, bool selective) {
  DFM_CHECK(X.ndim() == 3 || X.ndim() == 4,
            "dssm_scan_2d: X must be [d, H, W] or [N, d, H, W], got ",
            shape_str(X.shape()));
  const bool unbatched = X.ndim() == 3;
  Tensor x = unbatched ? X.reshaped({1, X.dim(0), X.dim(1), X.dim(2)}) : X;
  const auto n = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  DFM_CHECK(h * w >= 1, "dssm_scan_2d: empty grid");
  DFM_CHECK(cfg.channels() == d, "dssm_scan_2d: predictors expect ", cfg.channels(),
            " channels, input has ", d);
  const auto k = cfg.anchors.size();
  Tensor offsets = ops::linear_channels(x, cfg.offset_weight, cfg.offset_bias)
                       .reshaped({n, k, 2, h, w});
  Tensor weights = ops::linear_channels(x, cfg.weight_weight, cfg.weight_bias);
  Tensor sampled = ops::deformable_aggregate(x, offsets, weights, cfg.anchors.anchors);
  Tensor y = apply_ssm(x, ssm, selective, sampled);
  return unbatched ? y.reshaped(X.shape()) : y;
}

}  // namespace dfm
