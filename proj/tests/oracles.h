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

// Reference computations shared by the unit tests and the acceptance
// binary. They deliberately avoid the library's own helpers.

#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "dfm/backbone.h"
#include "dfm/dssm.h"

namespace dfm::oracle {

// Learnable scalar count of a backbone, summed layer by layer from the
// block formulas.
inline std::int64_t backbone_param_count(const ArchSpec& spec, std::int64_t in_channels) {
  const std::int64_t e = spec.mixer.expansion, k = spec.mixer.conv_kernel;
  const std::int64_t n = spec.mixer.state_size;
  const std::int64_t anchors = anchor_count(spec.mixer.anchors);
  const std::int64_t stem = spec.stem_channels;
  const std::int64_t w0 = spec.widths[0];
  std::int64_t total = stem * in_channels * 9 + 2 * stem + w0 * stem * 9 + 2 * w0;

  auto gated = [&](std::int64_t w) {
    const std::int64_t h = e * w;
    return 2 * w + 2 * (w * h + h) + h * k + h + (h * w + w);
  };
  auto dssm = [&](std::int64_t w) {
    const std::int64_t h = e * w;
    std::int64_t scan = h * n + h;
    if (spec.mixer.selective)
      scan += 2 * (n * h + n) + h * h + h;
    else
      scan += 2 * n * h + h;
    std::int64_t deform = anchors * h + anchors;
    if (!spec.mixer.freeze_offsets) deform += 2 * anchors * h + 2 * anchors;
    const std::int64_t r = spec.ffn_ratio;
    const std::int64_t ffn = 2 * w + (w * r * w + r * w) + (r * w * w + w);
    return gated(w) + scan + deform + ffn;
  };
  const int level_of_stage[6] = {0, 1, 2, 2, 3, 3};
  for (int s = 0; s < 6; ++s) {
    const std::int64_t w = spec.widths[level_of_stage[s]];
    for (int b = 0; b < spec.stage_depths[s]; ++b) {
      switch (spec.stage_kinds[s]) {
        case 'C':
          total += 2 * w * w * 9 + 4 * w;
          break;
        case 'G':
          total += gated(w);
          break;
        case 'D':
          total += dssm(w);
          break;
      }
    }
    if (s == 0 || s == 1 || s == 3) {
      const std::int64_t wn = spec.widths[level_of_stage[s + 1]];
      total += wn * w * 9 + wn;
    }
  }
  for (auto w : spec.widths) total += 2 * w + w * w + w;
  return total;
}

// Row-major position table built by walking the grid with two nested
// loops: entry t - 1 holds (column, row) of token t.
inline std::vector<std::pair<std::int64_t, std::int64_t>> sweep_table(std::int64_t h,
                                                                      std::int64_t w) {
  std::vector<std::pair<std::int64_t, std::int64_t>> table;
  for (std::int64_t row = 1; row <= h; ++row)
    for (std::int64_t col = 1; col <= w; ++col) table.emplace_back(col, row);
  return table;
}

// Fraction-of-thresholds AUC counted one pair at a time.
inline double brute_auc(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  double acc = 0.0;
  for (double t : thresholds) {
    std::int64_t hit = 0;
    for (double e : errors)
      if (e <= t) ++hit;
    acc += static_cast<double>(hit) / static_cast<double>(errors.size());
  }
  return acc / static_cast<double>(thresholds.size());
}

}  // namespace dfm::oracle
