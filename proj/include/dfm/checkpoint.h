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

// Binary checkpoint, all integers and doubles little-endian:
//   "DFMCKPT1"                 8-byte magic
//   u32 version
//   u64 config hash            FNV-1a of the canonical config text
//   i64 step, i64 epoch
//   f64 held-out MPJPE         NaN when not evaluated
//   u32 n, n bytes             canonical config text (JSON)
//   u32 blob count, then per blob:
//     u8 kind (0 param, 1 Adam first moment, 2 Adam second moment, 3 buffer)
//     u32 n, n bytes name
//     u64 numel, numel f64 values

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dfm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class BlobKind : std::uint8_t { kParam = 0, kAdamM = 1, kAdamV = 2, kBuffer = 3 };

struct Blob {
  BlobKind kind = BlobKind::kParam;
  std::string name;
  std::vector<double> values;
  bool operator==(const Blob&) const = default;
};

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double heldout_mpjpe = 0.0;
  std::string config_text;
  std::vector<Blob> blobs;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws FormatError with the byte offset of the first bad field.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dfm
