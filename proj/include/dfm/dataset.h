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

// On-disk dataset directory:
//   manifest    JSON: format tag, version, sample count, image shape, joint
//               count and per-sample seed and intrinsics
//   images.bin  count x 3 x S x S little-endian float32, row-major
//   joints.bin  count x J x 3 little-endian float32 (x, y, z in mm)

#pragma once

#include <filesystem>
#include <vector>

#include "dfm/synth.h"

namespace dfm {

inline constexpr int kDatasetVersion = 1;

void write_dataset(const std::vector<SkeletonSample>& samples,
                   const std::filesystem::path& dir);

// Throws FormatError (with the byte offset where decoding failed when
// there is one) for missing, corrupt or inconsistent files.
std::vector<SkeletonSample> read_dataset(const std::filesystem::path& dir);

std::vector<SkeletonSample> generate_dataset(std::int64_t count, std::uint64_t first_seed,
                                             const SynthConfig& config = {});

}  // namespace dfm
