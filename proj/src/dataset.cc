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

#include "dfm/dataset.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dfm/error.h"
#include "json.hpp"

namespace dfm {

namespace {

constexpr const char* kFormatTag = "dfmamba-hands";

void put_f32(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_f32(const std::string& in, std::size_t pos) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError("manifest: " + where + " lacks '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest: " + where + " field '" + key + "': " + e.what());
  }
}

}  // namespace

void write_dataset(const std::vector<SkeletonSample>& samples,
                   const std::filesystem::path& dir) {
  DFM_CHECK(!samples.empty(), "write_dataset: no samples");
  const auto side = samples.front().image.dim(2);
  const auto joints = samples.front().joints.size();
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = kFormatTag;
  manifest["version"] = kDatasetVersion;
  manifest["count"] = samples.size();
  manifest["image_shape"] = {3, side, side};
  manifest["joint_count"] = joints;
  manifest["dtype"] = "float32le";
  auto& entries = manifest["samples"] = nlohmann::json::array();

  std::string images, joint_bytes;
  images.reserve(samples.size() * static_cast<std::size_t>(3 * side * side) * 4);
  for (const auto& s : samples) {
    DFM_CHECK(s.image.shape() == (Shape{3, side, side}),
              "write_dataset: all images must share one shape");
    DFM_CHECK(s.joints.size() == joints, "write_dataset: joint counts differ");
    for (double v : s.image.data()) put_f32(images, v);
    for (const auto& j : s.joints.joints)
      for (double v : j) put_f32(joint_bytes, v);
    entries.push_back({{"seed", s.seed},
                       {"fx", s.intrinsics.fx},
                       {"fy", s.intrinsics.fy},
                       {"cx", s.intrinsics.cx},
                       {"cy", s.intrinsics.cy}});
  }
  write_file(dir / "manifest", manifest.dump(1) + "\n");
  write_file(dir / "images.bin", images);
  write_file(dir / "joints.bin", joint_bytes);
}

std::vector<SkeletonSample> read_dataset(const std::filesystem::path& dir) {
  const std::string text = read_file(dir / "manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest: ") + e.what(),
                      static_cast<std::int64_t>(e.byte));
  }
  if (!manifest.is_object() || manifest.value("format", "") != kFormatTag)
    throw FormatError("manifest: not a " + std::string(kFormatTag) + " manifest", 0);
  const auto version = field<int>(manifest, "version", "header");
  if (version != kDatasetVersion)
    throw FormatError("manifest: unsupported version " + std::to_string(version));
  const auto count = field<std::int64_t>(manifest, "count", "header");
  const auto shape = field<std::vector<std::int64_t>>(manifest, "image_shape", "header");
  const auto joints = field<std::int64_t>(manifest, "joint_count", "header");
  if (count < 0 || shape.size() != 3 || shape[0] != 3 || shape[1] < 1 || shape[1] != shape[2])
    throw FormatError("manifest: invalid count or image shape");
  if (joints != kNumJoints)
    throw FormatError("manifest: joint count " + std::to_string(joints) + ", expected " +
                      std::to_string(kNumJoints));
  const auto& entries = manifest.at("samples");
  if (!entries.is_array() || static_cast<std::int64_t>(entries.size()) != count)
    throw FormatError("manifest: sample table does not match count " +
                      std::to_string(count));

  const std::string images = read_file(dir / "images.bin");
  const std::string joint_bytes = read_file(dir / "joints.bin");
  const auto side = shape[1];
  const auto image_floats = 3 * side * side;
  const auto image_bytes = static_cast<std::size_t>(count * image_floats * 4);
  const auto joint_size = static_cast<std::size_t>(count * joints * 3 * 4);
  if (images.size() != image_bytes)
    throw FormatError("images.bin: expected " + std::to_string(image_bytes) + " bytes, found " +
                          std::to_string(images.size()),
                      static_cast<std::int64_t>(std::min(images.size(), image_bytes)));
  if (joint_bytes.size() != joint_size)
    throw FormatError("joints.bin: expected " + std::to_string(joint_size) + " bytes, found " +
                          std::to_string(joint_bytes.size()),
                      static_cast<std::int64_t>(std::min(joint_bytes.size(), joint_size)));

  std::vector<SkeletonSample> out(static_cast<std::size_t>(count));
  for (std::int64_t n = 0; n < count; ++n) {
    auto& s = out[static_cast<std::size_t>(n)];
    const auto& e = entries[static_cast<std::size_t>(n)];
    const auto where = "sample " + std::to_string(n);
    s.seed = field<std::uint64_t>(e, "seed", where);
    s.intrinsics = {field<double>(e, "fx", where), field<double>(e, "fy", where),
                    field<double>(e, "cx", where), field<double>(e, "cy", where)};
    s.image = Tensor({3, side, side});
    auto img = s.image.data();
    const auto base = static_cast<std::size_t>(n * image_floats * 4);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = get_f32(images, base + 4 * i);
    const auto jbase = static_cast<std::size_t>(n * joints * 3 * 4);
    for (std::int64_t j = 0; j < joints; ++j) {
      Joint p{};
      for (int c = 0; c < 3; ++c)
        p[static_cast<std::size_t>(c)] =
            get_f32(joint_bytes, jbase + static_cast<std::size_t>((j * 3 + c) * 4));
      s.joints.joints.push_back(p);
    }
    for (const auto& p : s.joints.joints) {
      if (!(p[2] > 0.0)) throw FormatError("joints.bin: " + where + " has a joint behind the camera",
                                           static_cast<std::int64_t>(jbase));
      s.keypoints.push_back(project(p, s.intrinsics));
    }
  }
  return out;
}

std::vector<SkeletonSample> generate_dataset(std::int64_t count, std::uint64_t first_seed,
                                             const SynthConfig& config) {
  DFM_CHECK(count >= 1, "generate_dataset: count must be positive");
  std::vector<SkeletonSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i)
    out.push_back(generate_sample(first_seed + static_cast<std::uint64_t>(i), config));
  return out;
}

}  // namespace dfm
