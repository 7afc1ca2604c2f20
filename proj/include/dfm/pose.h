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

// 2.5D hand-pose head: per-joint heatmaps on the /4 grid plus root-relative
// depths, soft-argmax decoding, and the evaluation metrics.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dfm/backbone.h"
#include "dfm/blocks.h"
#include "dfm/tensor.h"

namespace dfm {

inline constexpr int kNumJoints = 21;
inline constexpr int kRootJoint = 0;  // wrist

using Joint = std::array<double, 3>;  // camera space, millimeters

struct JointSet {
  std::vector<Joint> joints;
  int root = kRootJoint;

  std::int64_t size() const { return static_cast<std::int64_t>(joints.size()); }
};

// Pinhole camera; pixel k covers [k, k + 1) so u = fx * X / Z + cx.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Pixel coordinates of a camera-space point.
std::array<double, 2> project(const Joint& p, const Intrinsics& k);
Joint back_project(double u, double v, double z, const Intrinsics& k);

struct HeatmapStack {
  Tensor logits;     // [N, J, h, w]
  Tensor log_probs;  // [N, J, h, w], log-softmax over each map
  Tensor depth;      // [N, J], root-relative millimeters
  double stride = 4.0;  // input pixels per heatmap cell

  // exp(log_probs) as plain values (not recorded).
  Tensor probabilities() const;
};

class HeatmapHead {
 public:
  HeatmapHead(const std::array<std::int64_t, kNumLevels>& level_widths,
              std::int64_t width, std::int64_t joints, Rng& rng);

  // Projects every level to `width` channels, resizes to the /4 grid and
  // sums; then conv3x3-GELU and a 1x1 conv produce the heatmap logits, and
  // a linear map of the pooled fused features gives the depths.
  HeatmapStack forward(const PyramidFeatures& features) const;

  void collect(ParamList& out, const std::string& prefix) const;
  std::int64_t joints() const { return joints_; }

  std::array<Linear, kNumLevels> proj;
  Tensor fuse_weight;  // [width, width, 3, 3]
  Tensor fuse_bias;    // [width]
  Linear heatmap;      // width -> J, per site
  Linear depth;        // width -> J, pooled

 private:
  std::int64_t joints_;
};

HeatmapStack head_forward(const HeatmapHead& head, const PyramidFeatures& features);

// Expected pixel position under heatmap `joint` of sample `n` of the
// normalized probabilities `probs` [N, J, h, w]; cell (i, j) has its center
// at pixel (stride * j + stride / 2, stride * i + stride / 2).
std::array<double, 2> soft_argmax_pixel(const Tensor& probs, std::int64_t n,
                                        std::int64_t joint, double stride);

// Decodes sample `n`: soft-argmax pixel location, depth = root_depth +
// predicted relative depth, back-projected through `k`. Every map must be
// non-negative and sum to 1 within 1e-9.
JointSet decode_soft_argmax(const HeatmapStack& stack, std::int64_t n,
                            const Intrinsics& k, double root_depth);

// Mean Euclidean distance over joints (mm).
double mpjpe(const JointSet& pred, const JointSet& gt);
// mpjpe after translating both sets so their roots sit at the origin.
double epe_root_aligned(const JointSet& pred, const JointSet& gt);

// 0, 1, ..., 50 mm.
std::vector<double> default_pck_thresholds();
// Mean over thresholds of the fraction of samples with error <= threshold.
double auc_pck(std::span<const double> errors, std::span<const double> thresholds);

}  // namespace dfm
