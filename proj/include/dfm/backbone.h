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

#pragma once

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfm/blocks.h"

namespace dfm {

inline constexpr int kNumStages = 6;
inline constexpr int kNumLevels = 4;

class ArchParseError : public std::invalid_argument {
 public:
  ArchParseError(const std::string& what, int position)
      : std::invalid_argument(what), position_(position) {}
  int position() const { return position_; }

 private:
  int position_;
};

// Six-stage layout. Stage s (1-based) runs at resolution level
// {0, 1, 2, 2, 3, 3}[s-1]; downsampling follows stages 1, 2 and 4.
struct ArchSpec {
  std::string stage_kinds = "CCDGDG";  // C: conv, D: DSSM+FFN, G: gated conv
  std::array<int, kNumStages> stage_depths{3, 3, 5, 5, 2, 1};
  std::array<std::int64_t, kNumLevels> widths{80, 160, 352, 704};
  std::array<int, 3> downsample_after{1, 2, 4};
  MixerConfig mixer;
  std::int64_t ffn_ratio = 4;
  std::int64_t stem_channels = 32;

  static ArchSpec preset(const std::string& name);  // "default" or "tiny"
  std::int64_t stage_width(int stage) const;         // 0-based stage
  void validate() const;
  std::string describe() const;
};

// Validates `s` against {C, D, G}^6 and returns the default preset with
// those stage kinds. ArchParseError carries the offending index.
ArchSpec parse_arch(const std::string& s);
ArchSpec parse_arch(const std::string& s, const std::string& preset);

struct PyramidFeatures {
  std::array<Tensor, kNumLevels> maps;  // [N, w_i, H/4/2^i, W/4/2^i]
  Tensor flat;                          // [N, sum of map sizes]
};

class Backbone {
 public:
  Backbone(const ArchSpec& spec, std::int64_t in_channels, std::uint64_t seed);

  PyramidFeatures forward_pyramid(const Tensor& image, Mode mode = Mode::kEval);

  const ArchSpec& spec() const { return spec_; }
  std::int64_t in_channels() const { return in_channels_; }
  ParamList parameters() const;
  ParamList buffers() const;
  // Per-stage output shapes for a square input of the given side.
  std::vector<Shape> stage_shapes(std::int64_t side) const;
  const std::vector<std::unique_ptr<Layer>>& stage_layers(int stage) const {
    return stages_[static_cast<std::size_t>(stage)];
  }

 private:
  ArchSpec spec_;
  std::int64_t in_channels_;
  std::unique_ptr<ConvStem> stem_;
  std::array<std::vector<std::unique_ptr<Layer>>, kNumStages> stages_;
  std::array<std::unique_ptr<Downsample>, kNumStages> downsample_;
  std::array<LayerNorm, kNumLevels> level_norm_;
  std::array<Linear, kNumLevels> level_proj_;
};

std::unique_ptr<Backbone> build_backbone(const ArchSpec& spec, std::int64_t in_channels,
                                         std::uint64_t seed);

// Number of learnable scalars.
std::int64_t count_params(const ParamList& params);
std::int64_t count_params(const Backbone& model);

}  // namespace dfm
