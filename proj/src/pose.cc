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

#include "dfm/pose.h"

#include <algorithm>
#include <cmath>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/tape.h"

namespace dfm {

std::array<double, 2> project(const Joint& p, const Intrinsics& k) {
  DFM_CHECK(p[2] > 0.0, "project: point behind the camera (z = ", p[2], ")");
  return {k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy};
}

Joint back_project(double u, double v, double z, const Intrinsics& k) {
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

Tensor HeatmapStack::probabilities() const {
  Tensor p = log_probs.clone();
  for (auto& v : p.data()) v = std::exp(v);
  return p;
}

HeatmapHead::HeatmapHead(const std::array<std::int64_t, kNumLevels>& level_widths,
                         std::int64_t width, std::int64_t joints, Rng& rng)
    : joints_(joints) {
  DFM_CHECK(width >= 1 && joints >= 1, "heatmap head: invalid width or joint count");
  for (int l = 0; l < kNumLevels; ++l)
    proj[static_cast<std::size_t>(l)] =
        Linear::init(level_widths[static_cast<std::size_t>(l)], width, rng);
  fuse_weight = conv_weight(width, width, 3, rng);
  fuse_bias = Tensor::zeros({width}).set_requires_grad(true);
  heatmap = Linear::init(width, joints, rng);
  depth = Linear::init(width, joints, rng);
}

HeatmapStack HeatmapHead::forward(const PyramidFeatures& features) const {
  const Tensor& finest = features.maps[0];
  DFM_CHECK(finest.defined() && finest.ndim() == 4, "heatmap head: missing pyramid");
  const auto h = finest.dim(2), w = finest.dim(3);
  Tensor fused;
  for (int l = 0; l < kNumLevels; ++l) {
    const auto& map = features.maps[static_cast<std::size_t>(l)];
    Tensor p = proj[static_cast<std::size_t>(l)](map);
    if (p.dim(2) != h || p.dim(3) != w) p = ops::resize_bilinear(p, h, w);
    fused = fused.defined() ? ops::add(fused, p) : p;
  }
  fused = ops::gelu(ops::conv2d(fused, fuse_weight, fuse_bias, 1, 1));
  HeatmapStack out;
  out.logits = heatmap(fused);
  out.log_probs = ops::log_softmax_spatial(out.logits);
  out.depth = depth(ops::global_avg_pool(fused));
  return out;
}

void HeatmapHead::collect(ParamList& out, const std::string& prefix) const {
  for (int l = 0; l < kNumLevels; ++l)
    proj[static_cast<std::size_t>(l)].collect(out,
                                              prefix + "proj" + std::to_string(l) + ".");
  out.push_back({prefix + "fuse.weight", fuse_weight});
  out.push_back({prefix + "fuse.bias", fuse_bias});
  heatmap.collect(out, prefix + "heatmap.");
  depth.collect(out, prefix + "depth.");
}

HeatmapStack head_forward(const HeatmapHead& head, const PyramidFeatures& features) {
  return head.forward(features);
}

std::array<double, 2> soft_argmax_pixel(const Tensor& probs, std::int64_t n,
                                        std::int64_t joint, double stride) {
  DFM_CHECK(probs.ndim() == 4, "soft_argmax: expected [N, J, h, w] probabilities");
  DFM_CHECK(n >= 0 && n < probs.dim(0) && joint >= 0 && joint < probs.dim(1),
            "soft_argmax: index out of range");
  const auto h = probs.dim(2), w = probs.dim(3);
  const double* p = probs.ptr() + (n * probs.dim(1) + joint) * h * w;
  double total = 0.0, u = 0.0, v = 0.0;
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j) {
      const double q = p[i * w + j];
      DFM_CHECK(q >= 0.0, "soft_argmax: heatmap ", joint, " has a negative entry");
      total += q;
      u += q * (stride * static_cast<double>(j) + 0.5 * stride);
      v += q * (stride * static_cast<double>(i) + 0.5 * stride);
    }
  DFM_CHECK(std::abs(total - 1.0) <= 1e-9, "soft_argmax: heatmap ", joint,
            " is not normalized (sums to ", total, ")");
  return {u, v};
}

JointSet decode_soft_argmax(const HeatmapStack& stack, std::int64_t n,
                            const Intrinsics& k, double root_depth) {
  const Tensor probs = stack.probabilities();
  const auto joints = probs.dim(1);
  DFM_CHECK(stack.depth.dim(1) == joints, "decode: depth count does not match heatmaps");
  JointSet out;
  out.joints.reserve(static_cast<std::size_t>(joints));
  for (std::int64_t j = 0; j < joints; ++j) {
    const auto [u, v] = soft_argmax_pixel(probs, n, j, stack.stride);
    const double z = root_depth + stack.depth.at({n, j});
    out.joints.push_back(back_project(u, v, z, k));
  }
  return out;
}

namespace {

double distance(const Joint& a, const Joint& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double mpjpe(const JointSet& pred, const JointSet& gt) {
  DFM_CHECK(pred.size() == gt.size(), "mpjpe: joint counts differ (", pred.size(),
            " vs ", gt.size(), ")");
  DFM_CHECK(gt.size() > 0, "mpjpe: empty joint set");
  double total = 0.0;
  for (std::size_t j = 0; j < gt.joints.size(); ++j)
    total += distance(pred.joints[j], gt.joints[j]);
  return total / static_cast<double>(gt.size());
}

double epe_root_aligned(const JointSet& pred, const JointSet& gt) {
  DFM_CHECK(pred.size() == gt.size(), "epe: joint counts differ (", pred.size(), " vs ",
            gt.size(), ")");
  DFM_CHECK(gt.root >= 0 && gt.root < gt.size() && pred.root == gt.root,
            "epe: invalid root index");
  const auto& pr = pred.joints[static_cast<std::size_t>(pred.root)];
  const auto& gr = gt.joints[static_cast<std::size_t>(gt.root)];
  double total = 0.0;
  for (std::size_t j = 0; j < gt.joints.size(); ++j) {
    const Joint a{pred.joints[j][0] - pr[0], pred.joints[j][1] - pr[1],
                  pred.joints[j][2] - pr[2]};
    const Joint b{gt.joints[j][0] - gr[0], gt.joints[j][1] - gr[1], gt.joints[j][2] - gr[2]};
    total += distance(a, b);
  }
  return total / static_cast<double>(gt.size());
}

std::vector<double> default_pck_thresholds() {
  std::vector<double> t;
  for (int mm = 0; mm <= 50; ++mm) t.push_back(mm);
  return t;
}

double auc_pck(std::span<const double> errors, std::span<const double> thresholds) {
  DFM_CHECK(!errors.empty() && !thresholds.empty(), "auc_pck: empty input");
  DFM_CHECK(std::is_sorted(thresholds.begin(), thresholds.end()),
            "auc_pck: thresholds must be ascending");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double t : thresholds) {
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    total += static_cast<double>(below) / static_cast<double>(sorted.size());
  }
  return total / static_cast<double>(thresholds.size());
}

}  // namespace dfm
