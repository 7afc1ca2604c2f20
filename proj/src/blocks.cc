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

#include "dfm/blocks.h"

#include <cmath>

#include "dfm/error.h"

namespace dfm {

namespace {

Tensor param(Tensor t) {
  t.set_requires_grad(true);
  return t;
}

}  // namespace

Linear Linear::init(std::int64_t in, std::int64_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {param(rng.uniform_tensor({out, in}, -bound, bound)), param(Tensor::zeros({out}))};
}

Linear Linear::zeros(std::int64_t in, std::int64_t out) {
  return {param(Tensor::zeros({out, in})), param(Tensor::zeros({out}))};
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "weight", weight});
  out.push_back({prefix + "bias", bias});
}

LayerNorm LayerNorm::init(std::int64_t channels, double gamma_value) {
  return {param(Tensor({channels}, gamma_value)), param(Tensor::zeros({channels}))};
}

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "gamma", gamma});
  out.push_back({prefix + "beta", beta});
}

BatchNorm BatchNorm::init(std::int64_t channels) {
  BatchNorm bn;
  bn.gamma = param(Tensor::ones({channels}));
  bn.beta = param(Tensor::zeros({channels}));
  bn.state.running_mean = Tensor::zeros({channels});
  bn.state.running_var = Tensor::ones({channels});
  return bn;
}

void BatchNorm::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "gamma", gamma});
  out.push_back({prefix + "beta", beta});
}

void BatchNorm::collect_buffers(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "running_mean", state.running_mean});
  out.push_back({prefix + "running_var", state.running_var});
}

Tensor conv_weight(std::int64_t out, std::int64_t in, std::int64_t k, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in * k * k));
  return param(rng.normal_tensor({out, in, k, k}, stddev));
}

Tensor as_batched(const Tensor& x) {
  if (x.ndim() == 4) return x;
  DFM_CHECK(x.ndim() == 3, "expected [C, H, W] or [N, C, H, W], got ",
            shape_str(x.shape()));
  return x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
}

// ---- stem ------------------------------------------------------------------

ConvStem::ConvStem(std::int64_t in_channels, std::int64_t out_channels, Rng& rng,
                   std::int64_t mid_channels)
    : conv1(conv_weight(mid_channels, in_channels, 3, rng)),
      conv2(conv_weight(out_channels, mid_channels, 3, rng)),
      bn1(BatchNorm::init(mid_channels)),
      bn2(BatchNorm::init(out_channels)) {}

Tensor ConvStem::forward(const Tensor& image, Mode mode) {
  Tensor x = as_batched(image);
  DFM_CHECK(x.dim(2) % 4 == 0 && x.dim(3) % 4 == 0,
            "conv stem: spatial extents must be divisible by 4, got ",
            shape_str(x.shape()));
  x = ops::relu(bn1(ops::conv2d(x, conv1, Tensor(), 2, 1), mode));
  x = ops::relu(bn2(ops::conv2d(x, conv2, Tensor(), 2, 1), mode));
  return image.ndim() == 3 ? x.reshaped({x.dim(1), x.dim(2), x.dim(3)}) : x;
}

void ConvStem::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "conv1.weight", conv1});
  bn1.collect(out, prefix + "bn1.");
  out.push_back({prefix + "conv2.weight", conv2});
  bn2.collect(out, prefix + "bn2.");
}

void ConvStem::collect_buffers(ParamList& out, const std::string& prefix) const {
  bn1.collect_buffers(out, prefix + "bn1.");
  bn2.collect_buffers(out, prefix + "bn2.");
}

// ---- convolution block -----------------------------------------------------

ConvBasicBlock::ConvBasicBlock(std::int64_t channels, Rng& rng)
    : conv1(conv_weight(channels, channels, 3, rng)),
      conv2(conv_weight(channels, channels, 3, rng)),
      norm1(LayerNorm::init(channels)),
      norm2(LayerNorm::init(channels, 0.0)) {}

Tensor ConvBasicBlock::forward(const Tensor& input, Mode) {
  Tensor x = as_batched(input);
  Tensor h = ops::gelu(norm1(ops::conv2d(x, conv1, Tensor(), 1, 1)));
  h = norm2(ops::conv2d(h, conv2, Tensor(), 1, 1));
  Tensor y = ops::gelu(ops::add(h, x));
  return input.ndim() == 3 ? y.reshaped(input.shape()) : y;
}

void ConvBasicBlock::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "conv1.weight", conv1});
  norm1.collect(out, prefix + "norm1.");
  out.push_back({prefix + "conv2.weight", conv2});
  norm2.collect(out, prefix + "norm2.");
}

// ---- token mixers ----------------------------------------------------------

MixerBlock::MixerBlock(MixerKind kind, std::int64_t channels, const MixerConfig& cfg,
                       Rng& rng)
    : mixer(kind), config(cfg), norm(LayerNorm::init(channels)) {
  DFM_CHECK(cfg.expansion >= 1 && cfg.conv_kernel >= 1 && cfg.state_size >= 1,
            "mixer block: invalid configuration");
  const auto hidden = cfg.expansion * channels;
  in_x = Linear::init(channels, hidden, rng);
  in_z = Linear::init(channels, hidden, rng);
  out = Linear::zeros(hidden, channels);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.conv_kernel));
  conv_weight = param(rng.uniform_tensor({hidden, cfg.conv_kernel}, -bound, bound));
  conv_bias = param(Tensor::zeros({hidden}));
  if (kind == MixerKind::kGated) return;

  const auto n = cfg.state_size;
  a_log = Tensor({hidden, n});
  for (std::int64_t c = 0; c < hidden; ++c)
    for (std::int64_t k = 0; k < n; ++k) a_log.at({c, k}) = std::log(static_cast<double>(k + 1));
  a_log = param(a_log);
  d_skip = param(Tensor::ones({hidden}));
  auto reference = SsmParams::init(hidden, n, rng, cfg.selective);
  if (cfg.selective) {
    predictors = *reference.selective;
    for (auto& [name, t] : predictors->named("")) t.set_requires_grad(true);
  } else {
    b_static = param(reference.B);
    c_static = param(reference.C);
    delta_raw = Tensor({hidden});
    for (std::int64_t c = 0; c < hidden; ++c)
      delta_raw[c] = std::log(std::expm1(reference.delta[c]));
    delta_raw = param(delta_raw);
  }
  if (kind == MixerKind::kDssm) {
    deform = DeformableScanConfig::init(cfg.anchors, hidden);
    for (auto& [name, t] : deform->named("")) {
      const bool frozen = cfg.freeze_offsets && name.rfind("offset", 0) == 0;
      t.set_requires_grad(!frozen);
    }
  }
}

std::string MixerBlock::kind() const {
  switch (mixer) {
    case MixerKind::kGated:
      return "gated";
    case MixerKind::kSsm:
      return "ssm";
    case MixerKind::kDssm:
      return "dssm";
  }
  return "?";
}

SsmParams MixerBlock::resolved_ssm() const {
  DFM_CHECK(mixer != MixerKind::kGated, "gated block has no scan parameters");
  SsmParams p;
  p.A = ops::scale(ops::exp(a_log), -1.0);
  p.D = d_skip;
  if (config.selective) {
    p.selective = predictors;
  } else {
    p.B = b_static;
    p.C = c_static;
    p.delta = ops::softplus(delta_raw);
  }
  return p;
}

Tensor MixerBlock::forward(const Tensor& input, Mode) {
  Tensor x = as_batched(input);
  Tensor xn = norm(x);
  Tensor z1 = ops::silu(ops::depthwise_causal_conv1d(in_x(xn), conv_weight, conv_bias));
  if (mixer == MixerKind::kSsm) {
    z1 = apply_ssm(z1, resolved_ssm(), config.selective);
  } else if (mixer == MixerKind::kDssm) {
    z1 = dssm_scan_2d(z1, *deform, resolved_ssm(), config.selective);
  }
  Tensor z2 = ops::silu(in_z(xn));
  Tensor y = ops::add(out(ops::mul(z1, z2)), x);
  return input.ndim() == 3 ? y.reshaped(input.shape()) : y;
}

void MixerBlock::collect(ParamList& out_params, const std::string& prefix) const {
  norm.collect(out_params, prefix + "norm.");
  in_x.collect(out_params, prefix + "in_x.");
  in_z.collect(out_params, prefix + "in_z.");
  out_params.push_back({prefix + "conv.weight", conv_weight});
  out_params.push_back({prefix + "conv.bias", conv_bias});
  if (mixer != MixerKind::kGated) {
    out_params.push_back({prefix + "ssm.a_log", a_log});
    out_params.push_back({prefix + "ssm.d_skip", d_skip});
    if (config.selective) {
      for (auto& p : predictors->named(prefix + "ssm.")) out_params.push_back(p);
    } else {
      out_params.push_back({prefix + "ssm.b_static", b_static});
      out_params.push_back({prefix + "ssm.c_static", c_static});
      out_params.push_back({prefix + "ssm.delta_raw", delta_raw});
    }
  }
  if (deform) {
    for (auto& p : deform->named(prefix + "deform.")) {
      if (p.tensor.requires_grad()) out_params.push_back(p);
    }
  }
  out.collect(out_params, prefix + "out.");
}

// ---- feed-forward ----------------------------------------------------------

FfnBlock::FfnBlock(std::int64_t channels, std::int64_t ratio, Rng& rng)
    : norm(LayerNorm::init(channels)),
      fc1(Linear::init(channels, ratio * channels, rng)),
      fc2(Linear::zeros(ratio * channels, channels)) {}

Tensor FfnBlock::forward(const Tensor& input, Mode) {
  Tensor x = as_batched(input);
  Tensor y = ops::add(fc2(ops::gelu(fc1(norm(x)))), x);
  return input.ndim() == 3 ? y.reshaped(input.shape()) : y;
}

void FfnBlock::collect(ParamList& out, const std::string& prefix) const {
  norm.collect(out, prefix + "norm.");
  fc1.collect(out, prefix + "fc1.");
  fc2.collect(out, prefix + "fc2.");
}

// ---- downsampling ----------------------------------------------------------

Downsample::Downsample(std::int64_t in_channels, std::int64_t out_channels, Rng& rng)
    : weight(conv_weight(out_channels, in_channels, 3, rng)),
      bias(param(Tensor::zeros({out_channels}))) {}

Tensor Downsample::forward(const Tensor& input, Mode) {
  Tensor x = as_batched(input);
  DFM_CHECK(x.dim(2) % 2 == 0 && x.dim(3) % 2 == 0,
            "downsample: spatial extents must be even, got ", shape_str(x.shape()));
  Tensor y = ops::conv2d(x, weight, bias, 2, 1);
  return input.ndim() == 3 ? y.reshaped({y.dim(1), y.dim(2), y.dim(3)}) : y;
}

void Downsample::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "weight", weight});
  out.push_back({prefix + "bias", bias});
}

}  // namespace dfm
