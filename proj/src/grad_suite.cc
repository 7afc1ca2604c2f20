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

#include "dfm/grad_suite.h"

#include <algorithm>
#include <functional>

#include "dfm/blocks.h"
#include "dfm/ops.h"
#include "dfm/pose.h"
#include "dfm/rng.h"
#include "dfm/tape.h"
#include "dfm/trainer.h"

namespace dfm {

namespace {

using Forward = std::function<Tensor()>;

GradSuiteEntry check(const std::string& name, const Forward& forward, const ParamList& params,
                     Rng& rng, double eps) {
  Shape shape;
  {
    NoGrad no_grad;
    shape = forward().shape();
  }
  const Tensor projection = rng.uniform_tensor(shape, -1.0, 1.0);
  auto f = [&] { return ops::dot_const(forward(), projection); };
  return {name, grad_check(f, params, eps, name)};
}

Tensor input(Rng& rng, Shape shape) {
  return rng.uniform_tensor(std::move(shape), -1.0, 1.0).set_requires_grad(true);
}

// Values bounded away from zero so kinks (relu, abs) are never straddled.
Tensor away_from_zero(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t.set_requires_grad(true);
}

void randomize(const ParamList& params, Rng& rng, double stddev) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (auto& v : t.data()) v = stddev * rng.normal();
  }
}

ParamList with_input(ParamList params, const Tensor& x) {
  params.insert(params.begin(), {"x", x});
  return params;
}

}  // namespace

std::vector<GradSuiteEntry> run_op_grad_suite(std::uint64_t seed, double eps) {
  Rng rng(seed);
  std::vector<GradSuiteEntry> out;
  const Shape s{2, 3, 4, 5};

  {
    Tensor a = input(rng, s), b = input(rng, s);
    out.push_back(check("add", [=] { return ops::add(a, b); }, {{"a", a}, {"b", b}}, rng, eps));
    out.push_back(check("sub", [=] { return ops::sub(a, b); }, {{"a", a}, {"b", b}}, rng, eps));
    out.push_back(check("mul", [=] { return ops::mul(a, b); }, {{"a", a}, {"b", b}}, rng, eps));
    out.push_back(check("scale", [=] { return ops::scale(a, -1.7); }, {{"a", a}}, rng, eps));
    out.push_back(
        check("add_scalar", [=] { return ops::add_scalar(a, 0.3); }, {{"a", a}}, rng, eps));
  }
  {
    Tensor x = away_from_zero(rng, s);
    out.push_back(check("relu", [=] { return ops::relu(x); }, {{"x", x}}, rng, eps));
    out.push_back(check("abs", [=] { return ops::abs(x); }, {{"x", x}}, rng, eps));
    Tensor y = input(rng, s);
    out.push_back(check("gelu", [=] { return ops::gelu(y); }, {{"x", y}}, rng, eps));
    out.push_back(check("silu", [=] { return ops::silu(y); }, {{"x", y}}, rng, eps));
    out.push_back(check("softplus", [=] { return ops::softplus(y); }, {{"x", y}}, rng, eps));
    out.push_back(check("exp", [=] { return ops::exp(y); }, {{"x", y}}, rng, eps));
    out.push_back(check("square", [=] { return ops::square(y); }, {{"x", y}}, rng, eps));
    out.push_back(check("sum", [=] { return ops::sum(y); }, {{"x", y}}, rng, eps));
    out.push_back(check("mean", [=] { return ops::mean(y); }, {{"x", y}}, rng, eps));
    out.push_back(check("reshape", [=] { return ops::reshape(y, {6, 20}); }, {{"x", y}}, rng,
                        eps));
    out.push_back(check("slice_channels", [=] { return ops::slice_channels(y, 1, 3); },
                        {{"x", y}}, rng, eps));
    Tensor z = input(rng, {2, 7});
    out.push_back(check("concat_flat",
                        [=] {
                          const Tensor parts[] = {y, z};
                          return ops::concat_flat(parts);
                        },
                        {{"a", y}, {"b", z}}, rng, eps));
  }
  {
    Tensor x = input(rng, {2, 3, 4, 5});
    Tensor w = input(rng, {4, 3}), b = input(rng, {4});
    out.push_back(check("linear_channels", [=] { return ops::linear_channels(x, w, b); },
                        {{"x", x}, {"w", w}, {"b", b}}, rng, eps));
    Tensor v = input(rng, {3, 3});
    out.push_back(check("linear", [=] { return ops::linear(v, w, b); },
                        {{"x", v}, {"w", w}, {"b", b}}, rng, eps));
    Tensor k = input(rng, {4, 3, 3, 3}), kb = input(rng, {4});
    out.push_back(check("conv2d_s1", [=] { return ops::conv2d(x, k, kb, 1, 1); },
                        {{"x", x}, {"w", k}, {"b", kb}}, rng, eps));
    Tensor x6 = input(rng, {2, 3, 6, 6});
    out.push_back(check("conv2d_s2", [=] { return ops::conv2d(x6, k, Tensor(), 2, 1); },
                        {{"x", x6}, {"w", k}}, rng, eps));
    Tensor dw = input(rng, {3, 4}), db = input(rng, {3});
    out.push_back(check("depthwise_causal_conv1d",
                        [=] { return ops::depthwise_causal_conv1d(x, dw, db); },
                        {{"x", x}, {"w", dw}, {"b", db}}, rng, eps));
    out.push_back(
        check("global_avg_pool", [=] { return ops::global_avg_pool(x); }, {{"x", x}}, rng, eps));
    out.push_back(check("resize_bilinear_up", [=] { return ops::resize_bilinear(x, 8, 7); },
                        {{"x", x}}, rng, eps));
    out.push_back(check("resize_bilinear_down", [=] { return ops::resize_bilinear(x, 2, 3); },
                        {{"x", x}}, rng, eps));
  }
  {
    Tensor x = input(rng, {2, 5, 3, 3});
    Tensor g = input(rng, {5}), b = input(rng, {5});
    out.push_back(check("layer_norm_channels",
                        [=] { return ops::layer_norm_channels(x, g, b); },
                        {{"x", x}, {"gamma", g}, {"beta", b}}, rng, eps));
    auto state = std::make_shared<ops::BatchNormState>();
    state->running_mean = Tensor::zeros({5});
    state->running_var = Tensor::ones({5});
    out.push_back(check("batch_norm2d_train",
                        [=] { return ops::batch_norm2d(x, g, b, *state, true); },
                        {{"x", x}, {"gamma", g}, {"beta", b}}, rng, eps));
    out.push_back(check("batch_norm2d_eval",
                        [=] { return ops::batch_norm2d(x, g, b, *state, false); },
                        {{"x", x}, {"gamma", g}, {"beta", b}}, rng, eps));
    out.push_back(check("log_softmax_spatial", [=] { return ops::log_softmax_spatial(x); },
                        {{"x", x}}, rng, eps));
  }
  {
    // Scan with a time-varying delta, per-token B/C and a separate state
    // input, covering every operand of the fused kernel.
    const std::int64_t n = 2, d = 3, st = 4, len = 6;
    Tensor us = input(rng, {n, d, 2, 3}), uk = input(rng, {n, d, 2, 3});
    Tensor delta = rng.uniform_tensor({n, d, 2, 3}, 0.05, 0.8).set_requires_grad(true);
    Tensor a = rng.uniform_tensor({d, st}, -2.0, -0.2).set_requires_grad(true);
    Tensor bm = input(rng, {n, st, 2, 3}), cm = input(rng, {n, st, 2, 3});
    Tensor dd = input(rng, {d});
    out.push_back(check("state_space_scan",
                        [=] {
                          ops::ScanOperands in;
                          in.u_state = us;
                          in.u_skip = uk;
                          in.delta = delta;
                          in.delta_strides = {d * len, len, 0, 1};
                          in.A = a;
                          in.B = bm;
                          in.b_strides = {st * len, 0, len, 1};
                          in.C = cm;
                          in.c_strides = {st * len, 0, len, 1};
                          in.D = dd;
                          return ops::state_space_scan(in, n, d, len, st);
                        },
                        {{"u_state", us}, {"u_skip", uk}, {"delta", delta}, {"A", a},
                         {"B", bm}, {"C", cm}, {"D", dd}},
                        rng, eps));
  }
  {
    Tensor map = input(rng, {3, 4, 5});
    out.push_back(check("bilinear_sample", [=] { return ops::bilinear_sample(map, 2.3, 3.6); },
                        {{"map", map}}, rng, eps));
    out.push_back(check("bilinear_sample_edge",
                        [=] { return ops::bilinear_sample(map, 0.4, 4.7); }, {{"map", map}},
                        rng, eps));
    const auto anchors = anchor_grid(AnchorVariant::K9).anchors;
    Tensor x = input(rng, {2, 3, 4, 5});
    Tensor off = rng.uniform_tensor({2, 9, 2, 4, 5}, -1.4, 1.4).set_requires_grad(true);
    Tensor w = input(rng, {2, 9, 4, 5});
    out.push_back(check("deformable_aggregate",
                        [=] { return ops::deformable_aggregate(x, off, w, anchors); },
                        {{"x", x}, {"offsets", off}, {"weights", w}}, rng, eps));
  }
  return out;
}

std::vector<GradSuiteEntry> run_block_grad_suite(const ArchSpec& spec, std::uint64_t seed,
                                                 double eps) {
  Rng rng(seed);
  std::vector<GradSuiteEntry> out;
  const std::int64_t d = std::min<std::int64_t>(spec.widths[0], 8);
  MixerConfig mixer = spec.mixer;
  mixer.state_size = std::min<std::int64_t>(mixer.state_size, 8);

  auto block_case = [&](const std::string& name, Layer& layer, const Tensor& x, Mode mode,
                        double stddev) {
    ParamList params;
    layer.collect(params, "");
    randomize(params, rng, stddev);
    out.push_back(check(name, [&layer, x, mode] { return layer.forward(x, mode); },
                        with_input(params, x), rng, eps));
  };

  {
    ConvStem stem(3, d, rng, 4);
    block_case("stem", stem, input(rng, {2, 3, 8, 8}), Mode::kTrain, 0.5);
  }
  {
    ConvBasicBlock conv(d, rng);
    block_case("conv_block", conv, input(rng, {2, d, 4, 4}), Mode::kTrain, 0.3);
  }
  {
    MixerBlock gated(MixerKind::kGated, d, mixer, rng);
    block_case("gated_block", gated, input(rng, {2, d, 4, 4}), Mode::kTrain, 0.3);
  }
  for (bool selective : {true, false}) {
    MixerConfig cfg = mixer;
    cfg.selective = selective;
    MixerBlock ssm(MixerKind::kSsm, d, cfg, rng);
    block_case(selective ? "ssm_block_selective" : "ssm_block_static", ssm,
               input(rng, {2, d, 3, 4}), Mode::kTrain, 0.3);
  }
  const std::pair<AnchorVariant, bool> dssm_cases[] = {{AnchorVariant::K1, true},
                                                       {AnchorVariant::K9, true},
                                                       {AnchorVariant::K25, true},
                                                       {AnchorVariant::K9, false}};
  for (auto [variant, selective] : dssm_cases) {
    MixerConfig cfg = mixer;
    cfg.anchors = variant;
    cfg.selective = selective;
    MixerBlock dssm(MixerKind::kDssm, d, cfg, rng);
    block_case("dssm_block_k" + std::to_string(anchor_count(variant)) +
                   (selective ? "_selective" : "_static"),
               dssm, input(rng, {2, d, 3, 4}), Mode::kTrain, 0.3);
  }
  {
    FfnBlock ffn(d, spec.ffn_ratio, rng);
    block_case("ffn_block", ffn, input(rng, {2, d, 3, 3}), Mode::kTrain, 0.3);
  }
  {
    Downsample down(d, 2 * d, rng);
    block_case("downsample", down, input(rng, {2, d, 4, 4}), Mode::kTrain, 0.3);
  }

  // Heatmap head and the training loss on a 32 x 32 input.
  const std::array<std::int64_t, kNumLevels> widths{4, 5, 6, 7};
  HeatmapHead head(widths, 6, kNumJoints, rng);
  PyramidFeatures features;
  for (int l = 0; l < kNumLevels; ++l)
    features.maps[static_cast<std::size_t>(l)] =
        input(rng, {2, widths[static_cast<std::size_t>(l)], 8 >> l, 8 >> l});
  ParamList head_params;
  head.collect(head_params, "");
  randomize(head_params, rng, 0.3);
  ParamList with_maps = head_params;
  for (int l = 0; l < kNumLevels; ++l)
    with_maps.push_back({"level" + std::to_string(l), features.maps[static_cast<std::size_t>(l)]});
  out.push_back(check("heatmap_head_logits", [&head, features] { return head.forward(features).logits; },
                      with_maps, rng, eps));
  out.push_back(check("heatmap_head_depth", [&head, features] { return head.forward(features).depth; },
                      with_maps, rng, eps));

  std::vector<SkeletonSample> samples(2);
  for (auto& s : samples) {
    s.intrinsics = {40.0, 40.0, 16.0, 16.0};
    for (int j = 0; j < kNumJoints; ++j) {
      const double z = rng.uniform(300.0, 400.0);
      const double u = rng.uniform(1.0, 31.0), v = rng.uniform(1.0, 31.0);
      s.joints.joints.push_back(back_project(u, v, z, s.intrinsics));
    }
  }
  const std::vector<const SkeletonSample*> batch{&samples[0], &samples[1]};
  TrainConfig loss_cfg;
  auto loss = [&head, features, batch, loss_cfg] {
    return compute_loss(head.forward(features), batch, loss_cfg);
  };
  out.push_back({"training_loss", grad_check(loss, with_maps, eps, "training_loss")});
  return out;
}

}  // namespace dfm
