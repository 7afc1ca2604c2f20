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

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfm/backbone.h"
#include "dfm/checkpoint.h"
#include "dfm/pose.h"
#include "dfm/synth.h"

namespace dfm {

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 1e-4;
  int epochs = 20;
  int batch_size = 8;
  std::uint64_t seed = 0;
  std::string arch = "CCDGDG";
  std::string preset = "tiny";
  int anchors = 9;
  bool freeze_offsets = false;
  double heatmap_weight = 1.0;
  double depth_weight = 0.02;  // per millimeter of L1 depth error
  double target_sigma = 2.0;   // Gaussian target width in heatmap cells
  std::int64_t head_width = 32;
  std::int64_t train_count = 400;  // leading samples; the rest are held out

  void validate() const;
  ArchSpec arch_spec() const;
  // Canonical JSON text; the checkpoint hash is taken over it.
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Backbone plus heatmap head.
class PoseModel {
 public:
  PoseModel(const ArchSpec& spec, std::int64_t head_width, std::uint64_t seed);
  explicit PoseModel(const TrainConfig& config);

  // images [N, 3, S, S] in [0, 1].
  HeatmapStack forward(const Tensor& images, Mode mode);

  ParamList parameters() const;
  ParamList buffers() const;
  Backbone& backbone() { return *backbone_; }
  const HeatmapHead& head() const { return *head_; }

 private:
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<HeatmapHead> head_;
};

// Stacks sample images into one [N, 3, S, S] batch.
Tensor stack_images(std::span<const SkeletonSample* const> samples);

// heatmap_weight * mean cross-entropy against normalized Gaussian targets
// (sigma in cells) + depth_weight * mean L1 of root-relative depth (mm).
// Ground-truth joints must project onto the heatmap grid.
Tensor compute_loss(const HeatmapStack& stack, std::span<const SkeletonSample* const> gt,
                    const TrainConfig& config);

// Normalized Gaussian target map [h, w] centered on pixel (u, v).
Tensor gaussian_target(double u, double v, std::int64_t h, std::int64_t w, double stride,
                       double sigma);

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// One Adam step with bias correction and decoupled weight decay over every
// parameter (a parameter without a gradient counts as zero gradient).
// Throws NumericError naming the parameter if a gradient is non-finite;
// nothing is modified in that case.
void adam_step(const ParamList& params, AdamState& state, const AdamConfig& config);

struct EvalMetrics {
  double mpjpe = 0.0;
  double epe = 0.0;
  double auc = 0.0;
  std::vector<double> per_sample;  // MPJPE of each sample
};

EvalMetrics evaluate(PoseModel& model, std::span<const SkeletonSample> samples,
                     int batch_size = 16);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_mpjpe = 0.0;
  double heldout_epe = 0.0;
  double heldout_auc = 0.0;
};

struct TrainResult {
  double untrained_mpjpe = 0.0;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_mpjpe = 0.0;
  Checkpoint best;
  Checkpoint last;
};

Checkpoint capture(const PoseModel& model, const AdamState& adam, const TrainConfig& config,
                   std::int64_t epoch, double heldout_mpjpe);
// Restores parameters, buffers and moments; names and sizes must match.
void restore(const Checkpoint& ckpt, PoseModel& model, AdamState& adam);

struct TrainOptions {
  // Continue from this state (its epoch counts as completed).
  std::optional<Checkpoint> resume;
  // Written whenever the held-out MPJPE improves.
  std::string best_path;
  // Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

// Trains on samples [0, train_count) and evaluates on the rest after every
// epoch. A non-finite loss aborts with NumericError after saving the last
// good state next to best_path (when set).
TrainResult train(const TrainConfig& config, std::span<const SkeletonSample> dataset,
                  const TrainOptions& options = {});

}  // namespace dfm
