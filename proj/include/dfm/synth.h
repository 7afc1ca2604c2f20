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

// Procedural hand images: a randomized 21-joint kinematic chain, projected
// with a pinhole camera and drawn as color-coded capsules with joint blobs
// over a noisy background with occluders.
//
// Joint order: 0 wrist; then thumb, index, middle, ring, pinky with four
// joints each, base to tip (1-4, 5-8, 9-12, 13-16, 17-20).

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dfm/pose.h"
#include "dfm/tensor.h"

namespace dfm {

struct SynthConfig {
  std::int64_t image_size = 128;
  // Multiplier applied to the canonical bone lengths (palm ~85 mm).
  double hand_scale_min = 0.85;
  double hand_scale_max = 1.15;
  // Flexion limits per finger joint (radians) and abduction spread.
  double max_flexion_base = 1.4;
  double max_flexion_mid = 1.6;
  double max_flexion_tip = 1.2;
  double max_abduction = 0.3;
  // Global rotation: roll about the optical axis in [-max_roll, max_roll],
  // pitch and yaw in [-max_tilt, max_tilt].
  double max_roll = 3.14159;
  double max_tilt = 0.6;
  // Wrist distance from the camera (mm).
  double depth_min = 380.0;
  double depth_max = 520.0;
  double focal_scale = 1.5;   // focal length = focal_scale * image_size
  int max_occluders = 2;
  double noise_stddev = 0.03;
  double margin = 4.0;        // joints stay this many pixels inside
  int max_tries = 100;
};

struct SkeletonSample {
  Tensor image;  // [3, S, S], values in [0, 1] quantized to 8-bit levels
  JointSet joints;
  Intrinsics intrinsics;
  std::uint64_t seed = 0;
  // Pixel centers the joints were drawn at.
  std::vector<std::array<double, 2>> keypoints;
};

// Deterministic in (seed, config). Stored joints and intrinsics are exactly
// representable as 32-bit floats. Throws NumericError if no pose lands
// inside the image within config.max_tries attempts.
SkeletonSample generate_sample(std::uint64_t seed, const SynthConfig& config = {});

}  // namespace dfm
