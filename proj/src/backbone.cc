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

#include "dfm/backbone.h"

#include <sstream>

#include "dfm/error.h"

namespace dfm {

namespace {

constexpr std::array<int, kNumStages> kStageLevel{0, 1, 2, 2, 3, 3};
// Stages whose output feeds the pyramid, one per level.
constexpr std::array<int, kNumLevels> kPyramidStages{0, 1, 3, 5};

bool downsample_follows(const ArchSpec& spec, int stage) {
  for (int s : spec.downsample_after)
    if (s == stage + 1) return true;
  return false;
}

}  // namespace

ArchSpec ArchSpec::preset(const std::string& name) {
  ArchSpec spec;
  if (name == "default") return spec;
  if (name == "tiny") {
    spec.stage_depths = {1, 1, 2, 2, 1, 1};
    spec.widths = {8, 16, 32, 64};
    return spec;
  }
  throw ContractViolation("unknown preset '" + name + "' (expected default or tiny)");
}

std::int64_t ArchSpec::stage_width(int stage) const {
  return widths[static_cast<std::size_t>(kStageLevel[static_cast<std::size_t>(stage)])];
}

void ArchSpec::validate() const {
  DFM_CHECK(stage_kinds.size() == kNumStages, "ArchSpec: need 6 stage kinds");
  for (int d : stage_depths) DFM_CHECK(d >= 1, "ArchSpec: stage depths must be positive");
  for (auto w : widths) DFM_CHECK(w >= 1, "ArchSpec: widths must be positive");
  DFM_CHECK((downsample_after == std::array<int, 3>{1, 2, 4}),
            "ArchSpec: downsampling is fixed after stages 1, 2 and 4");
}

std::string ArchSpec::describe() const {
  std::ostringstream os;
  os << "arch=" << stage_kinds << " depths=";
  for (int i = 0; i < kNumStages; ++i) os << (i ? "," : "") << stage_depths[i];
  os << " widths=";
  for (int i = 0; i < kNumLevels; ++i) os << (i ? "," : "") << widths[i];
  os << " anchors=" << anchor_count(mixer.anchors) << " state=" << mixer.state_size
     << " selective=" << (mixer.selective ? 1 : 0);
  return os.str();
}

ArchSpec parse_arch(const std::string& s) { return parse_arch(s, "default"); }

ArchSpec parse_arch(const std::string& s, const std::string& preset) {
  for (std::size_t i = 0; i < s.size() && i < kNumStages; ++i) {
    const char c = s[i];
    if (c != 'C' && c != 'D' && c != 'G')
      throw ArchParseError("invalid stage kind '" + std::string(1, c) + "' at index " +
                               std::to_string(i) + " in '" + s + "' (expected C, D or G)",
                           static_cast<int>(i));
  }
  if (s.size() != kNumStages)
    throw ArchParseError("architecture string '" + s + "' has length " +
                             std::to_string(s.size()) + ", expected 6",
                         static_cast<int>(std::min<std::size_t>(s.size(), kNumStages)));
  ArchSpec spec = ArchSpec::preset(preset);
  spec.stage_kinds = s;
  return spec;
}

Backbone::Backbone(const ArchSpec& spec, std::int64_t in_channels, std::uint64_t seed)
    : spec_(spec), in_channels_(in_channels) {
  spec_.validate();
  DFM_CHECK(in_channels >= 1, "backbone: in_channels must be positive");
  Rng rng(seed);
  stem_ = std::make_unique<ConvStem>(in_channels, spec_.widths[0], rng, spec_.stem_channels);
  for (int s = 0; s < kNumStages; ++s) {
    const auto width = spec_.stage_width(s);
    auto& layers = stages_[static_cast<std::size_t>(s)];
    for (int b = 0; b < spec_.stage_depths[static_cast<std::size_t>(s)]; ++b) {
      switch (spec_.stage_kinds[static_cast<std::size_t>(s)]) {
        case 'C':
          layers.push_back(std::make_unique<ConvBasicBlock>(width, rng));
          break;
        case 'D':
          layers.push_back(
              std::make_unique<MixerBlock>(MixerKind::kDssm, width, spec_.mixer, rng));
          layers.push_back(std::make_unique<FfnBlock>(width, spec_.ffn_ratio, rng));
          break;
        case 'G':
          layers.push_back(
              std::make_unique<MixerBlock>(MixerKind::kGated, width, spec_.mixer, rng));
          break;
        default:
          throw ContractViolation("backbone: invalid stage kind");
      }
    }
    if (downsample_follows(spec_, s))
      downsample_[static_cast<std::size_t>(s)] =
          std::make_unique<Downsample>(width, spec_.stage_width(s + 1), rng);
  }
  for (int l = 0; l < kNumLevels; ++l) {
    const auto w = spec_.widths[static_cast<std::size_t>(l)];
    level_norm_[static_cast<std::size_t>(l)] = LayerNorm::init(w);
    level_proj_[static_cast<std::size_t>(l)] = Linear::init(w, w, rng);
  }
}

PyramidFeatures Backbone::forward_pyramid(const Tensor& image, Mode mode) {
  Tensor x = as_batched(image);
  DFM_CHECK(x.dim(1) == in_channels_, "backbone: image has ", x.dim(1),
            " channels, model expects ", in_channels_);
  DFM_CHECK(x.dim(2) % 32 == 0 && x.dim(3) % 32 == 0,
            "backbone: spatial extents must be divisible by 32, got ",
            shape_str(x.shape()));
  PyramidFeatures out;
  x = stem_->forward(x, mode);
  int level = 0;
  for (int s = 0; s < kNumStages; ++s) {
    for (auto& layer : stages_[static_cast<std::size_t>(s)]) x = layer->forward(x, mode);
    if (level < kNumLevels && kPyramidStages[static_cast<std::size_t>(level)] == s) {
      const auto l = static_cast<std::size_t>(level);
      out.maps[l] = level_proj_[l](level_norm_[l](x));
      ++level;
    }
    if (auto& ds = downsample_[static_cast<std::size_t>(s)]) x = ds->forward(x, mode);
  }
  out.flat = ops::concat_flat(out.maps);
  return out;
}

ParamList Backbone::parameters() const {
  ParamList out;
  stem_->collect(out, "stem.");
  for (int s = 0; s < kNumStages; ++s) {
    const auto& layers = stages_[static_cast<std::size_t>(s)];
    for (std::size_t b = 0; b < layers.size(); ++b)
      layers[b]->collect(out, "stage" + std::to_string(s + 1) + "." + std::to_string(b) +
                                  "." + layers[b]->kind() + ".");
    if (auto& ds = downsample_[static_cast<std::size_t>(s)])
      ds->collect(out, "downsample" + std::to_string(s + 1) + ".");
  }
  for (int l = 0; l < kNumLevels; ++l) {
    const auto p = "pyramid" + std::to_string(l) + ".";
    level_norm_[static_cast<std::size_t>(l)].collect(out, p + "norm.");
    level_proj_[static_cast<std::size_t>(l)].collect(out, p + "proj.");
  }
  return out;
}

ParamList Backbone::buffers() const {
  ParamList out;
  stem_->collect_buffers(out, "stem.");
  return out;
}

std::vector<Shape> Backbone::stage_shapes(std::int64_t side) const {
  std::vector<Shape> shapes;
  std::int64_t extent = side / 4;
  for (int s = 0; s < kNumStages; ++s) {
    shapes.push_back({spec_.stage_width(s), extent, extent});
    if (downsample_follows(spec_, s)) extent /= 2;
  }
  return shapes;
}

std::unique_ptr<Backbone> build_backbone(const ArchSpec& spec, std::int64_t in_channels,
                                         std::uint64_t seed) {
  return std::make_unique<Backbone>(spec, in_channels, seed);
}

std::int64_t count_params(const ParamList& params) {
  std::int64_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  return total;
}

std::int64_t count_params(const Backbone& model) { return count_params(model.parameters()); }

}  // namespace dfm
