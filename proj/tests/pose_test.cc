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

#include <gtest/gtest.h>

#include <cmath>

#include "dfm/error.h"
#include "dfm/pose.h"
#include "dfm/tape.h"
#include "oracles.h"

namespace dfm {
namespace {

PyramidFeatures random_pyramid(const std::array<std::int64_t, 4>& widths, std::int64_t side,
                               Rng& rng) {
  PyramidFeatures f;
  for (int l = 0; l < 4; ++l) {
    const auto s = side / (4 << l);
    f.maps[l] = rng.uniform_tensor({2, widths[l], s, s}, -1, 1);
  }
  return f;
}

JointSet make_set(std::vector<Joint> joints) { return JointSet{std::move(joints), 0}; }

TEST(Head, EmitsOneNormalizedMapPerJoint) {
  Rng rng(1);
  const std::array<std::int64_t, 4> widths{8, 16, 32, 64};
  HeatmapHead head(widths, 16, kNumJoints, rng);
  NoGrad ng;
  const auto stack = head_forward(head, random_pyramid(widths, 64, rng));
  EXPECT_EQ(stack.logits.shape(), (Shape{2, 21, 16, 16}));
  EXPECT_EQ(stack.depth.shape(), (Shape{2, 21}));
  const auto p = stack.probabilities();
  for (std::int64_t m = 0; m < 42; ++m) {
    double total = 0.0;
    for (std::int64_t s = 0; s < 256; ++s) total += p[m * 256 + s];
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Head, ZeroWeightsGiveUniformMapsAndBiasDepth) {
  Rng rng(2);
  const std::array<std::int64_t, 4> widths{8, 16, 32, 64};
  HeatmapHead head(widths, 8, kNumJoints, rng);
  ParamList params;
  head.collect(params, "");
  for (auto& p : params) {
    Tensor t = p.tensor;
    for (auto& v : t.data()) v = 0.0;
  }
  for (std::int64_t j = 0; j < kNumJoints; ++j) head.depth.bias[j] = 10.0 + j;
  NoGrad ng;
  const auto stack = head.forward(random_pyramid(widths, 64, rng));
  const auto p = stack.probabilities();
  for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 256.0, 1e-15);
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t j = 0; j < kNumJoints; ++j) EXPECT_EQ(stack.depth.at({n, j}), 10.0 + j);
}

TEST(Head, FusesEveryLevel) {
  Rng rng(3);
  const std::array<std::int64_t, 4> widths{4, 4, 4, 4};
  HeatmapHead head(widths, 4, 2, rng);
  auto f = random_pyramid(widths, 64, rng);
  NoGrad ng;
  const auto base = head.forward(f);
  for (int l = 0; l < 4; ++l) {
    auto g = f;
    g.maps[l] = ops::scale(f.maps[l], 2.0);
    const auto other = head.forward(g);
    double diff = 0.0;
    for (std::int64_t i = 0; i < base.logits.numel(); ++i)
      diff += std::abs(other.logits[i] - base.logits[i]);
    EXPECT_GT(diff, 0.0) << l;
  }
}

TEST(SoftArgmax, OneHotLandsOnCellCenter) {
  Tensor p({1, 1, 4, 5});
  p.at({0, 0, 2, 3}) = 1.0;
  const auto [u, v] = soft_argmax_pixel(p, 0, 0, 4.0);
  EXPECT_DOUBLE_EQ(u, 4.0 * 3 + 2.0);
  EXPECT_DOUBLE_EQ(v, 4.0 * 2 + 2.0);
}

TEST(SoftArgmax, SymmetricPeaksGiveTheMidpoint) {
  Tensor p({1, 1, 4, 4});
  p.at({0, 0, 0, 0}) = 0.5;
  p.at({0, 0, 2, 2}) = 0.5;
  const auto [u, v] = soft_argmax_pixel(p, 0, 0, 4.0);
  EXPECT_DOUBLE_EQ(u, 6.0);
  EXPECT_DOUBLE_EQ(v, 6.0);
}

TEST(SoftArgmax, RandomMapMatchesExplicitExpectation) {
  Rng rng(4);
  Tensor logits = rng.uniform_tensor({2, 3, 6, 7}, -3, 3);
  const auto p = ops::exp(ops::log_softmax_spatial(logits));
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t j = 0; j < 3; ++j) {
      double u = 0.0, v = 0.0;
      for (std::int64_t r = 0; r < 6; ++r)
        for (std::int64_t c = 0; c < 7; ++c) {
          const double q = p.at({n, j, r, c});
          u += q * (4.0 * c + 2.0);
          v += q * (4.0 * r + 2.0);
        }
      const auto got = soft_argmax_pixel(p, n, j, 4.0);
      EXPECT_NEAR(got[0], u, 1e-12);
      EXPECT_NEAR(got[1], v, 1e-12);
    }
}

TEST(SoftArgmax, RejectsUnnormalizedMaps) {
  Tensor p({1, 1, 2, 2}, 0.3);
  EXPECT_THROW(soft_argmax_pixel(p, 0, 0, 4.0), ContractViolation);
  Tensor q({1, 1, 1, 2}, std::vector<double>{1.5, -0.5});
  EXPECT_THROW(soft_argmax_pixel(q, 0, 0, 4.0), ContractViolation);
}

TEST(Decode, BackProjectsThroughIntrinsics) {
  const Intrinsics k{200.0, 210.0, 64.0, 60.0};
  HeatmapStack stack;
  Tensor logp({1, 2, 8, 8}, -1e300);
  logp.at({0, 0, 1, 2}) = 0.0;
  logp.at({0, 1, 5, 6}) = 0.0;
  stack.log_probs = logp;
  stack.depth = Tensor({1, 2}, std::vector<double>{0.0, 15.0});
  const auto joints = decode_soft_argmax(stack, 0, k, 400.0);
  ASSERT_EQ(joints.size(), 2);
  const auto a = back_project(10.0, 6.0, 400.0, k), b = back_project(26.0, 22.0, 415.0, k);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(joints.joints[0][i], a[i], 1e-12);
    EXPECT_NEAR(joints.joints[1][i], b[i], 1e-12);
  }
  const auto uv = project(joints.joints[1], k);
  EXPECT_NEAR(uv[0], 26.0, 1e-12);
  EXPECT_NEAR(uv[1], 22.0, 1e-12);
}

TEST(Camera, ProjectRequiresPositiveDepth) {
  const Intrinsics k{100, 100, 50, 50};
  EXPECT_THROW(project({1, 2, 0}, k), ContractViolation);
  const auto p = back_project(70.0, 20.0, 300.0, k);
  const auto uv = project(p, k);
  EXPECT_NEAR(uv[0], 70.0, 1e-12);
  EXPECT_NEAR(uv[1], 20.0, 1e-12);
}

TEST(Metrics, MpjpeExamples) {
  const auto gt = make_set({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(mpjpe(gt, gt), 0.0);
  EXPECT_EQ(mpjpe(make_set({{3, 0, 4}}), make_set({{0, 0, 0}})), 5.0);
  EXPECT_EQ(mpjpe(make_set({{2, 0, 0}, {0, 4, 0}}), make_set({{0, 0, 0}, {0, 0, 0}})), 3.0);
  EXPECT_THROW(mpjpe(make_set({{0, 0, 0}}), gt), ContractViolation);
}

TEST(Metrics, EpeRemovesTranslation) {
  Rng rng(5);
  std::vector<Joint> g, p;
  for (int j = 0; j < kNumJoints; ++j) {
    g.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(350, 450)});
    p.push_back({g.back()[0] + 7.0, g.back()[1] - 3.0, g.back()[2] + 11.0});
  }
  EXPECT_NEAR(epe_root_aligned(make_set(p), make_set(g)), 0.0, 1e-12);
  EXPECT_EQ(epe_root_aligned(make_set(g), make_set(g)), 0.0);
  EXPECT_NEAR(mpjpe(make_set(p), make_set(g)), std::sqrt(49.0 + 9.0 + 121.0), 1e-12);
}

TEST(Metrics, EpeMatchesHandComputedCase) {
  // Root at index 0; second joint differs by (0, 3, 4) after alignment.
  const auto gt = make_set({{10, 10, 10}, {10, 10, 20}});
  const auto pred = make_set({{0, 0, 0}, {0, 3, 14}});
  EXPECT_DOUBLE_EQ(epe_root_aligned(pred, gt), 2.5);
}

TEST(Metrics, AucExamplesAndOracle) {
  const std::vector<double> thresholds{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(auc_pck(std::vector<double>{0.0}, thresholds), 1.0);
  EXPECT_DOUBLE_EQ(auc_pck(std::vector<double>{100.0}, thresholds), 0.0);
  // Errors 0.5 and 2: fractions 0, .5, 1, 1 -> 0.625.
  EXPECT_DOUBLE_EQ(auc_pck(std::vector<double>{2.0, 0.5}, thresholds), 0.625);
  // Ties count as within the threshold.
  EXPECT_DOUBLE_EQ(auc_pck(std::vector<double>{1.0}, thresholds), 0.75);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> errors;
    for (int i = 0; i < 37; ++i) errors.push_back(std::round(rng.uniform(0, 60) * 4) / 4);
    const auto t = default_pck_thresholds();
    EXPECT_EQ(auc_pck(errors, t), oracle::brute_auc(errors, t));
  }
  EXPECT_THROW(auc_pck(std::vector<double>{}, thresholds), ContractViolation);
  EXPECT_THROW(auc_pck(std::vector<double>{1.0}, std::vector<double>{2, 1}), ContractViolation);
}

TEST(Metrics, AucIsMonotoneUnderErrorIncrease) {
  Rng rng(7);
  const auto t = default_pck_thresholds();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> errors;
    for (int i = 0; i < 21; ++i) errors.push_back(rng.uniform(0, 70));
    auto worse = errors;
    for (auto& e : worse) e += rng.uniform(0, 5);
    EXPECT_LE(auc_pck(worse, t), auc_pck(errors, t));
  }
}

}  // namespace
}  // namespace dfm
