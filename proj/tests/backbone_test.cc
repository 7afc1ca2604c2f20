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

#include <set>

#include "dfm/backbone.h"
#include "dfm/error.h"
#include "dfm/tape.h"
#include "oracles.h"

namespace dfm {
namespace {

std::vector<std::string> all_arch_strings() {
  std::vector<std::string> out;
  const char kinds[] = {'C', 'D', 'G'};
  for (int code = 0; code < 729; ++code) {
    std::string s;
    for (int i = 0, c = code; i < 6; ++i, c /= 3) s.push_back(kinds[c % 3]);
    out.push_back(s);
  }
  return out;
}

TEST(ParseArch, AcceptsStandardVariants) {
  const auto tri = parse_arch("CCDGDG");
  EXPECT_EQ(tri.stage_kinds, "CCDGDG");
  EXPECT_EQ(tri.stage_depths, (std::array<int, 6>{3, 3, 5, 5, 2, 1}));
  EXPECT_EQ(parse_arch("CCGGGG").stage_kinds, "CCGGGG");
  EXPECT_EQ(parse_arch("DDDDDD", "tiny").widths, (std::array<std::int64_t, 4>{8, 16, 32, 64}));
}

TEST(ParseArch, NamesTheOffendingPosition) {
  try {
    parse_arch("CCXGDG");
    FAIL();
  } catch (const ArchParseError& e) {
    EXPECT_EQ(e.position(), 2);
  }
  for (const auto& [s, pos] : std::vector<std::pair<std::string, int>>{
           {"ccdgdg", 0}, {"CCDGD", 5}, {"CCDGDGC", 6}, {"", 0}}) {
    try {
      parse_arch(s);
      FAIL() << s;
    } catch (const ArchParseError& e) {
      EXPECT_EQ(e.position(), pos) << s;
    }
  }
  EXPECT_THROW(parse_arch("CCDGDG", "huge"), ContractViolation);
}

TEST(ArchSpec, ValidateRejectsBadDepthsAndSchedules) {
  auto spec = ArchSpec::preset("tiny");
  spec.stage_depths[3] = 0;
  EXPECT_THROW(spec.validate(), ContractViolation);
  spec = ArchSpec::preset("tiny");
  spec.downsample_after = {1, 3, 4};
  EXPECT_THROW(spec.validate(), ContractViolation);
}

TEST(Backbone, PyramidScalesAndWidths) {
  const auto spec = parse_arch("CCDGDG", "tiny");
  auto model = build_backbone(spec, 3, 0);
  Rng rng(1);
  NoGrad ng;
  for (std::int64_t side : {64, 128, 96}) {
    const auto f = model->forward_pyramid(rng.uniform_tensor({1, 3, side, side}, 0, 1));
    std::int64_t flat = 0;
    for (int l = 0; l < kNumLevels; ++l) {
      const auto s = side / (4 << l);
      EXPECT_EQ(f.maps[l].shape(), (Shape{1, spec.widths[l], s, s})) << side;
      flat += spec.widths[l] * s * s;
    }
    EXPECT_EQ(f.flat.shape(), (Shape{1, flat}));
  }
}

TEST(Backbone, RectangularInputScales) {
  auto model = build_backbone(parse_arch("CCGGGG", "tiny"), 1, 0);
  NoGrad ng;
  const auto f = model->forward_pyramid(Tensor({2, 1, 64, 96}));
  EXPECT_EQ(f.maps[3].shape(), (Shape{2, 64, 2, 3}));
}

TEST(Backbone, RejectsIndivisibleExtentsAndWrongChannels) {
  auto model = build_backbone(parse_arch("CCDGDG", "tiny"), 3, 0);
  EXPECT_THROW(model->forward_pyramid(Tensor({3, 100, 100})), ContractViolation);
  EXPECT_THROW(model->forward_pyramid(Tensor({1, 64, 64})), ContractViolation);
}

TEST(Backbone, StageShapesFollowTheLayout) {
  auto model = build_backbone(ArchSpec::preset("default"), 3, 0);
  const auto shapes = model->stage_shapes(256);
  const std::vector<Shape> want = {{80, 64, 64},  {160, 32, 32}, {352, 16, 16},
                                   {352, 16, 16}, {704, 8, 8},   {704, 8, 8}};
  EXPECT_EQ(shapes, want);
}

TEST(Backbone, SameSeedIsBitwiseIdentical) {
  const auto spec = parse_arch("CCDGDG", "tiny");
  auto a = build_backbone(spec, 3, 7), b = build_backbone(spec, 3, 7);
  auto c = build_backbone(spec, 3, 8);
  const auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    for (std::int64_t j = 0; j < pa[i].tensor.numel(); ++j) {
      EXPECT_EQ(pa[i].tensor[j], pb[i].tensor[j]) << pa[i].name;
      any_diff |= pa[i].tensor[j] != pc[i].tensor[j];
    }
  }
  EXPECT_TRUE(any_diff);
  Rng rng(3);
  Tensor x = rng.uniform_tensor({1, 3, 64, 64}, -3, 3);
  NoGrad ng;
  const auto fa = a->forward_pyramid(x), fb = b->forward_pyramid(x);
  for (std::int64_t i = 0; i < fa.flat.numel(); ++i) ASSERT_EQ(fa.flat[i], fb.flat[i]);
}

TEST(Backbone, TinyParamCountMatchesIndependentSum) {
  for (const char* arch : {"CCDGDG", "CCGGGG", "CCCCCC", "DDDDDD", "GDCGDC"}) {
    for (int anchors : {1, 9, 25}) {
      auto spec = parse_arch(arch, "tiny");
      spec.mixer.anchors = anchor_variant_from_count(anchors);
      auto model = build_backbone(spec, 3, 0);
      EXPECT_EQ(count_params(*model), oracle::backbone_param_count(spec, 3)) << arch << anchors;
    }
  }
  auto frozen = parse_arch("CCDGDG", "tiny");
  frozen.mixer.freeze_offsets = true;
  EXPECT_EQ(count_params(*build_backbone(frozen, 3, 0)), oracle::backbone_param_count(frozen, 3));
  auto stat = parse_arch("CCDGDG", "tiny");
  stat.mixer.selective = false;
  EXPECT_EQ(count_params(*build_backbone(stat, 1, 0)), oracle::backbone_param_count(stat, 1));
}

TEST(Backbone, DefaultParamCountWithinBudget) {
  const auto spec = ArchSpec::preset("default");
  const auto count = count_params(*build_backbone(spec, 3, 0));
  EXPECT_EQ(count, oracle::backbone_param_count(spec, 3));
  EXPECT_GE(count, 36'000'000);
  EXPECT_LE(count, 48'000'000);
}

TEST(Backbone, EveryArchitectureIsFiniteAtInit) {
  Rng rng(5);
  Tensor x = rng.uniform_tensor({1, 3, 64, 64}, -3, 3);
  NoGrad ng;
  for (const auto& arch : all_arch_strings()) {
    auto model = build_backbone(parse_arch(arch, "tiny"), 3, 0);
    const auto f = model->forward_pyramid(x, Mode::kTrain);
    ASSERT_TRUE(f.flat.all_finite()) << arch;
  }
}

TEST(Backbone, ParameterNamesAreUnique) {
  auto model = build_backbone(parse_arch("CCDGDG", "tiny"), 3, 0);
  std::set<std::string> names;
  for (const auto& p : model->parameters()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
  EXPECT_EQ(model->buffers().size(), 4u);
}

}  // namespace
}  // namespace dfm
