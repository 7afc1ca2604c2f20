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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dfm/dssm.h"
#include "dfm/grad_check.h"
#include "dfm/ops.h"
#include "dfm/rng.h"
#include "dfm/ssm.h"
#include "dfm/tensor.h"

namespace dfm {

using ParamList = std::vector<NamedTensor>;

enum class Mode { kTrain, kEval };

// ---- parameter groups ------------------------------------------------------

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  // Uniform(+-1/sqrt(in)) weights, zero bias.
  static Linear init(std::int64_t in, std::int64_t out, Rng& rng);
  static Linear zeros(std::int64_t in, std::int64_t out);
  Tensor operator()(const Tensor& x) const {
    return ops::linear_channels(x, weight, bias);
  }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  static LayerNorm init(std::int64_t channels, double gamma_value = 1.0);
  Tensor operator()(const Tensor& x) const {
    return ops::layer_norm_channels(x, gamma, beta);
  }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  ops::BatchNormState state;
  static BatchNorm init(std::int64_t channels);
  Tensor operator()(const Tensor& x, Mode mode) {
    return ops::batch_norm2d(x, gamma, beta, state, mode == Mode::kTrain);
  }
  void collect(ParamList& out, const std::string& prefix) const;
  void collect_buffers(ParamList& out, const std::string& prefix) const;
};

// Kaiming-normal 3x3 (or k x k) convolution weight.
Tensor conv_weight(std::int64_t out, std::int64_t in, std::int64_t k, Rng& rng);

// ---- blocks ----------------------------------------------------------------

// Hyper-parameters shared by the token-mixer blocks.
struct MixerConfig {
  std::int64_t expansion = 2;    // hidden width = expansion * d
  std::int64_t conv_kernel = 4;  // causal depthwise 1D conv over sweep tokens
  std::int64_t state_size = 16;
  AnchorVariant anchors = AnchorVariant::K9;
  bool selective = true;
  bool freeze_offsets = false;   // keep offsets at zero (ablation)
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual void collect(ParamList& out, const std::string& prefix) const = 0;
  virtual void collect_buffers(ParamList&, const std::string&) const {}
  virtual std::string kind() const = 0;
};

// Two stride-2 3x3 convolutions (C0 -> 32 -> C1), each followed by batch
// normalization and ReLU. Spatial extents shrink by 4.
class ConvStem : public Layer {
 public:
  ConvStem(std::int64_t in_channels, std::int64_t out_channels, Rng& rng,
           std::int64_t mid_channels = 32);
  Tensor forward(const Tensor& image, Mode mode) override;
  void collect(ParamList& out, const std::string& prefix) const override;
  void collect_buffers(ParamList& out, const std::string& prefix) const override;
  std::string kind() const override { return "stem"; }

  Tensor conv1, conv2;
  BatchNorm bn1, bn2;
};

// ResNet-18 basic block with GELU: conv-norm-GELU-conv-norm, identity skip,
// final GELU. The second norm's scale starts at zero.
class ConvBasicBlock : public Layer {
 public:
  ConvBasicBlock(std::int64_t channels, Rng& rng);
  Tensor forward(const Tensor& x, Mode mode) override;
  void collect(ParamList& out, const std::string& prefix) const override;
  std::string kind() const override { return "conv"; }

  Tensor conv1, conv2;
  LayerNorm norm1, norm2;
};

enum class MixerKind { kGated, kSsm, kDssm };

// Mamba-style token mixer on X' = Norm(X):
//   Z1 = S(silu(Conv(Linear(X')))),  Z2 = silu(Linear(X')),
//   Y  = Linear(Z1 * Z2) + X
// where S is the identity (gated), the selective scan (ssm) or the
// deformable scan (dssm). The output projection starts at zero.
class MixerBlock : public Layer {
 public:
  MixerBlock(MixerKind kind, std::int64_t channels, const MixerConfig& config, Rng& rng);
  Tensor forward(const Tensor& x, Mode mode) override;
  void collect(ParamList& out, const std::string& prefix) const override;
  std::string kind() const override;

  // Scan parameters with A = -exp(a_log) and delta = softplus(delta_raw)
  // resolved on the tape.
  SsmParams resolved_ssm() const;

  MixerKind mixer;
  MixerConfig config;
  LayerNorm norm;
  Linear in_x, in_z, out;
  Tensor conv_weight;  // [hidden, k]
  Tensor conv_bias;    // [hidden]
  // Scan parameters (ssm / dssm only).
  Tensor a_log;      // [hidden, N]
  Tensor d_skip;     // [hidden]
  std::optional<SelectivePredictors> predictors;  // selective mode
  Tensor b_static, c_static, delta_raw;           // static mode
  std::optional<DeformableScanConfig> deform;     // dssm only
};

// Norm -> Linear(d, 4d) -> GELU -> Linear(4d, d) -> skip.
class FfnBlock : public Layer {
 public:
  FfnBlock(std::int64_t channels, std::int64_t ratio, Rng& rng);
  Tensor forward(const Tensor& x, Mode mode) override;
  void collect(ParamList& out, const std::string& prefix) const override;
  std::string kind() const override { return "ffn"; }

  LayerNorm norm;
  Linear fc1, fc2;
};

// Single 3x3 stride-2 convolution with bias; d -> d', extents halved.
class Downsample : public Layer {
 public:
  Downsample(std::int64_t in_channels, std::int64_t out_channels, Rng& rng);
  Tensor forward(const Tensor& x, Mode mode) override;
  void collect(ParamList& out, const std::string& prefix) const override;
  std::string kind() const override { return "downsample"; }

  Tensor weight, bias;
};

// Helpers for callers that hold [d, H, W] maps.
Tensor as_batched(const Tensor& x);

}  // namespace dfm
