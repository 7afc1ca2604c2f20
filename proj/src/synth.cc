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

#include "dfm/synth.h"

#include <algorithm>
#include <cmath>

#include "dfm/error.h"
#include "dfm/rng.h"

namespace dfm {

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;  // rows

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

Vec3 mul(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Mat3 rot_x(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}
Mat3 rot_y(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}
Mat3 rot_z(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

// The volatile store keeps GCC 11's SLP vectorizer at -O3 from dropping the
// float round trip on paired lanes.
double to_float(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

// Hand frame: x across the palm (thumb side positive), y from the wrist
// toward the fingers, z out of the back of the hand. Fingers flex toward -z.
struct FingerModel {
  Vec3 base;                    // knuckle relative to the wrist (mm)
  std::array<double, 3> bones;  // proximal, middle, distal (mm)
  double splay;                 // resting direction in the palm plane (rad)
};

constexpr std::array<FingerModel, 5> kFingers{{
    {{22.0, 18.0, -6.0}, {38.0, 32.0, 27.0}, 0.75},   // thumb (from the CMC)
    {{20.0, 80.0, 0.0}, {40.0, 24.0, 19.0}, 0.10},    // index
    {{4.0, 84.0, 0.0}, {44.0, 27.0, 20.0}, 0.0},      // middle
    {{-11.0, 80.0, 0.0}, {41.0, 26.0, 19.0}, -0.10},  // ring
    {{-24.0, 72.0, 0.0}, {33.0, 19.0, 17.0}, -0.22},  // pinky
}};

constexpr std::array<std::array<double, 3>, 5> kFingerColors{{
    {0.95, 0.25, 0.20},
    {0.95, 0.80, 0.15},
    {0.25, 0.85, 0.30},
    {0.20, 0.60, 0.95},
    {0.80, 0.30, 0.90},
}};

// Joints in the hand frame for one random articulation.
std::vector<Vec3> articulate(Rng& rng, const SynthConfig& cfg) {
  const double scale = rng.uniform(cfg.hand_scale_min, cfg.hand_scale_max);
  std::vector<Vec3> joints{{0.0, 0.0, 0.0}};
  for (std::size_t f = 0; f < kFingers.size(); ++f) {
    const auto& finger = kFingers[f];
    const double splay = finger.splay + rng.uniform(-cfg.max_abduction, cfg.max_abduction) *
                                            (f == 0 ? 1.0 : 0.5);
    std::array<double, 3> flex{rng.uniform(-0.2, cfg.max_flexion_base),
                               rng.uniform(0.0, cfg.max_flexion_mid),
                               rng.uniform(0.0, cfg.max_flexion_tip)};
    if (f == 0) {
      for (auto& a : flex) a *= 0.6;
    }
    Vec3 p = scale * finger.base;
    joints.push_back(p);
    double pitch = 0.0;
    for (int b = 0; b < 3; ++b) {
      pitch += flex[static_cast<std::size_t>(b)];
      const double len = scale * finger.bones[static_cast<std::size_t>(b)];
      // Direction: splay in the palm plane, then flexion toward the palm.
      const Vec3 dir{-std::sin(splay) * std::cos(pitch), std::cos(splay) * std::cos(pitch),
                     -std::sin(pitch)};
      p = p + len * dir;
      joints.push_back(p);
    }
  }
  return joints;
}

struct Canvas {
  std::int64_t size;
  std::vector<double> rgb;  // [3, S, S]

  double& at(int c, std::int64_t y, std::int64_t x) {
    return rgb[static_cast<std::size_t>((c * size + y) * size + x)];
  }
  void blend(std::int64_t y, std::int64_t x, const std::array<double, 3>& color,
             double alpha) {
    for (int c = 0; c < 3; ++c) {
      double& v = at(c, y, x);
      v = (1.0 - alpha) * v + alpha * color[static_cast<std::size_t>(c)];
    }
  }
};

double segment_distance(double px, double py, const std::array<double, 2>& a,
                        const std::array<double, 2>& b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1];
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - a[0]) * vx + (py - a[1]) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (a[0] + t * vx), dy = py - (a[1] + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Anti-aliased capsule: coverage falls from 1 to 0 across one pixel at the
// boundary. Pixel (x, y) is sampled at its center (x + 0.5, y + 0.5).
void draw_capsule(Canvas& canvas, const std::array<double, 2>& a,
                  const std::array<double, 2>& b, double radius,
                  const std::array<double, 3>& color) {
  const auto lo_x = static_cast<std::int64_t>(std::floor(std::min(a[0], b[0]) - radius - 1));
  const auto hi_x = static_cast<std::int64_t>(std::ceil(std::max(a[0], b[0]) + radius + 1));
  const auto lo_y = static_cast<std::int64_t>(std::floor(std::min(a[1], b[1]) - radius - 1));
  const auto hi_y = static_cast<std::int64_t>(std::ceil(std::max(a[1], b[1]) + radius + 1));
  for (auto y = std::max<std::int64_t>(lo_y, 0); y < std::min(hi_y, canvas.size); ++y)
    for (auto x = std::max<std::int64_t>(lo_x, 0); x < std::min(hi_x, canvas.size); ++x) {
      const double d = segment_distance(x + 0.5, y + 0.5, a, b);
      const double cover = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      if (cover > 0.0) canvas.blend(y, x, color, cover);
    }
}

void draw_blob(Canvas& canvas, const std::array<double, 2>& c, double sigma,
               const std::array<double, 3>& color) {
  const double reach = 3.0 * sigma;
  const auto lo_x = static_cast<std::int64_t>(std::floor(c[0] - reach));
  const auto hi_x = static_cast<std::int64_t>(std::ceil(c[0] + reach));
  const auto lo_y = static_cast<std::int64_t>(std::floor(c[1] - reach));
  const auto hi_y = static_cast<std::int64_t>(std::ceil(c[1] + reach));
  for (auto y = std::max<std::int64_t>(lo_y, 0); y < std::min(hi_y, canvas.size); ++y)
    for (auto x = std::max<std::int64_t>(lo_x, 0); x < std::min(hi_x, canvas.size); ++x) {
      const double dx = x + 0.5 - c[0], dy = y + 0.5 - c[1];
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      canvas.blend(y, x, color, w);
    }
}

struct Pose {
  std::vector<Vec3> camera;  // joints in camera space, float-rounded
  std::vector<std::array<double, 2>> pixels;
};

bool place(Rng& rng, const SynthConfig& cfg, const Intrinsics& k, Pose& pose) {
  const auto hand = articulate(rng, cfg);
  const Mat3 r = mul(rot_z(rng.uniform(-cfg.max_roll, cfg.max_roll)),
                     mul(rot_x(rng.uniform(-cfg.max_tilt, cfg.max_tilt)),
                         rot_y(rng.uniform(-cfg.max_tilt, cfg.max_tilt))));
  const double z = rng.uniform(cfg.depth_min, cfg.depth_max);
  // Center the hand (not the wrist) near the optical axis with some jitter.
  const Vec3 mid = mul(r, Vec3{0.0, 70.0, 0.0});
  const double jitter = 0.12 * z * static_cast<double>(cfg.image_size) / k.fx;
  const Vec3 t{-mid[0] + rng.uniform(-jitter, jitter), -mid[1] + rng.uniform(-jitter, jitter),
               z};
  pose.camera.clear();
  pose.pixels.clear();
  const double side = static_cast<double>(cfg.image_size);
  for (const auto& p : hand) {
    Vec3 c = mul(r, p) + t;
    for (auto& v : c) v = to_float(v);
    if (c[2] <= 1.0) return false;
    const auto uv = project({c[0], c[1], c[2]}, k);
    if (uv[0] < cfg.margin || uv[0] >= side - cfg.margin || uv[1] < cfg.margin ||
        uv[1] >= side - cfg.margin)
      return false;
    pose.camera.push_back(c);
    pose.pixels.push_back(uv);
  }
  return true;
}

}  // namespace

SkeletonSample generate_sample(std::uint64_t seed, const SynthConfig& cfg) {
  DFM_CHECK(cfg.image_size >= 16, "synth: image_size must be at least 16");
  DFM_CHECK(cfg.depth_min > 0.0 && cfg.depth_max >= cfg.depth_min,
            "synth: invalid depth range");
  Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  const double side = static_cast<double>(cfg.image_size);
  Intrinsics k;
  k.fx = k.fy = to_float(cfg.focal_scale * side);
  k.cx = k.cy = to_float(0.5 * side);

  Pose pose;
  int tries = 0;
  while (!place(rng, cfg, k, pose)) {
    if (++tries >= cfg.max_tries)
      throw NumericError("synth: no on-screen pose for seed " + std::to_string(seed) +
                         " after " + std::to_string(cfg.max_tries) + " tries");
  }

  Canvas canvas{cfg.image_size, std::vector<double>(
                                    static_cast<std::size_t>(3 * cfg.image_size * cfg.image_size))};
  // Background: a random linear color gradient.
  std::array<double, 3> base{}, gx{}, gy{};
  for (int c = 0; c < 3; ++c) {
    base[static_cast<std::size_t>(c)] = rng.uniform(0.1, 0.5);
    gx[static_cast<std::size_t>(c)] = rng.uniform(-0.2, 0.2);
    gy[static_cast<std::size_t>(c)] = rng.uniform(-0.2, 0.2);
  }
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < canvas.size; ++y)
      for (std::int64_t x = 0; x < canvas.size; ++x)
        canvas.at(c, y, x) = base[static_cast<std::size_t>(c)] +
                             gx[static_cast<std::size_t>(c)] * (x / side - 0.5) +
                             gy[static_cast<std::size_t>(c)] * (y / side - 0.5);

  // Bones far to near, each finger in its own color; the palm links the
  // wrist to every knuckle in a neutral skin tone.
  struct Bone {
    int a, b;
    std::array<double, 3> color;
  };
  std::vector<Bone> bones;
  const std::array<double, 3> palm{0.85, 0.70, 0.60};
  for (int f = 0; f < 5; ++f) {
    const int first = 1 + 4 * f;
    bones.push_back({0, first, palm});
    for (int j = 0; j < 3; ++j)
      bones.push_back({first + j, first + j + 1, kFingerColors[static_cast<std::size_t>(f)]});
  }
  auto bone_depth = [&](const Bone& b) {
    return pose.camera[static_cast<std::size_t>(b.a)][2] +
           pose.camera[static_cast<std::size_t>(b.b)][2];
  };
  std::stable_sort(bones.begin(), bones.end(),
                   [&](const Bone& l, const Bone& r) { return bone_depth(l) > bone_depth(r); });
  for (const auto& b : bones) {
    const double z = 0.5 * bone_depth(b);
    const double radius = std::max(1.2, 7.0 * k.fx / z);
    draw_capsule(canvas, pose.pixels[static_cast<std::size_t>(b.a)],
                 pose.pixels[static_cast<std::size_t>(b.b)], radius, b.color);
  }
  for (std::size_t j = 0; j < pose.pixels.size(); ++j) {
    const double tone = j == 0 ? 0.0 : 1.0;  // wrist dark, other joints white
    draw_blob(canvas, pose.pixels[j], 1.2, {tone, tone, tone});
  }

  const auto occluders = rng.uniform_int(0, cfg.max_occluders);
  for (std::int64_t o = 0; o < occluders; ++o) {
    const double w = rng.uniform(0.06, 0.16) * side, h = rng.uniform(0.06, 0.16) * side;
    const double x0 = rng.uniform(0.0, side - w), y0 = rng.uniform(0.0, side - h);
    const double gray = rng.uniform(0.2, 0.8);
    for (auto y = static_cast<std::int64_t>(y0); y < static_cast<std::int64_t>(y0 + h); ++y)
      for (auto x = static_cast<std::int64_t>(x0); x < static_cast<std::int64_t>(x0 + w); ++x)
        canvas.blend(y, x, {gray, gray, gray}, 0.85);
  }
  for (auto& v : canvas.rgb) v += cfg.noise_stddev * rng.normal();

  SkeletonSample out;
  out.seed = seed;
  out.intrinsics = k;
  out.keypoints = pose.pixels;
  out.image = Tensor({3, cfg.image_size, cfg.image_size});
  auto img = out.image.data();
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = std::round(std::clamp(canvas.rgb[i], 0.0, 1.0) * 255.0) / 255.0;
  for (auto& v : img) v = to_float(v);
  for (const auto& c : pose.camera) out.joints.joints.push_back({c[0], c[1], c[2]});
  return out;
}

}  // namespace dfm
