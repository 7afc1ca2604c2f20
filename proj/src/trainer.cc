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

#include "dfm/trainer.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/rng.h"
#include "dfm/tape.h"
#include "json.hpp"

namespace dfm {

// ---- configuration ---------------------------------------------------------

void TrainConfig::validate() const {
  DFM_CHECK(lr > 0.0, "train config: lr must be positive");
  DFM_CHECK(weight_decay >= 0.0, "train config: weight decay must be non-negative");
  DFM_CHECK(epochs >= 1, "train config: epochs must be at least 1");
  DFM_CHECK(batch_size >= 1, "train config: batch size must be at least 1");
  DFM_CHECK(heatmap_weight >= 0.0 && depth_weight >= 0.0,
            "train config: loss weights must be non-negative");
  DFM_CHECK(target_sigma > 0.0 && head_width >= 1 && train_count >= 1,
            "train config: invalid sigma, head width or split");
  anchor_variant_from_count(anchors);
  arch_spec();
}

ArchSpec TrainConfig::arch_spec() const {
  ArchSpec spec = parse_arch(arch, preset);
  spec.mixer.anchors = anchor_variant_from_count(anchors);
  spec.mixer.freeze_offsets = freeze_offsets;
  return spec;
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["arch"] = arch;
  j["preset"] = preset;
  j["anchors"] = anchors;
  j["freeze_offsets"] = freeze_offsets;
  j["heatmap_weight"] = heatmap_weight;
  j["depth_weight"] = depth_weight;
  j["target_sigma"] = target_sigma;
  j["head_width"] = head_width;
  j["train_count"] = train_count;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.arch = j.value("arch", c.arch);
    c.preset = j.value("preset", c.preset);
    c.anchors = j.value("anchors", c.anchors);
    c.freeze_offsets = j.value("freeze_offsets", c.freeze_offsets);
    c.heatmap_weight = j.value("heatmap_weight", c.heatmap_weight);
    c.depth_weight = j.value("depth_weight", c.depth_weight);
    c.target_sigma = j.value("target_sigma", c.target_sigma);
    c.head_width = j.value("head_width", c.head_width);
    c.train_count = j.value("train_count", c.train_count);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("train config: ") + e.what(),
                      static_cast<std::int64_t>(e.byte));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  return c;
}

// ---- model -----------------------------------------------------------------

PoseModel::PoseModel(const ArchSpec& spec, std::int64_t head_width, std::uint64_t seed)
    : backbone_(build_backbone(spec, 3, seed)) {
  Rng rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  head_ = std::make_unique<HeatmapHead>(spec.widths, head_width, kNumJoints, rng);
}

PoseModel::PoseModel(const TrainConfig& config)
    : PoseModel(config.arch_spec(), config.head_width, config.seed) {}

HeatmapStack PoseModel::forward(const Tensor& images, Mode mode) {
  DFM_CHECK(images.ndim() == 4 && images.dim(1) == 3,
            "pose model: images must be [N, 3, S, S], got ", shape_str(images.shape()));
  // Center the [0, 1] pixel range.
  Tensor x(images.shape());
  auto src = images.data();
  auto dst = x.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = 4.0 * (src[i] - 0.5);
  HeatmapStack out = head_->forward(backbone_->forward_pyramid(x, mode));
  out.stride = static_cast<double>(images.dim(2)) / static_cast<double>(out.logits.dim(2));
  return out;
}

ParamList PoseModel::parameters() const {
  ParamList out;
  for (auto& p : backbone_->parameters()) out.push_back({"backbone." + p.name, p.tensor});
  head_->collect(out, "head.");
  return out;
}

ParamList PoseModel::buffers() const {
  ParamList out;
  for (auto& p : backbone_->buffers()) out.push_back({"backbone." + p.name, p.tensor});
  return out;
}

Tensor stack_images(std::span<const SkeletonSample* const> samples) {
  DFM_CHECK(!samples.empty(), "stack_images: empty batch");
  const Shape one = samples.front()->image.shape();
  Shape shape{static_cast<std::int64_t>(samples.size())};
  shape.insert(shape.end(), one.begin(), one.end());
  Tensor out(shape);
  auto dst = out.data();
  std::size_t at = 0;
  for (const auto* s : samples) {
    DFM_CHECK(s->image.shape() == one, "stack_images: image shapes differ");
    for (double v : s->image.data()) dst[at++] = v;
  }
  return out;
}

// ---- loss ------------------------------------------------------------------

Tensor gaussian_target(double u, double v, std::int64_t h, std::int64_t w, double stride,
                       double sigma) {
  // Continuous cell coordinates: cell j spans pixels [stride j, stride (j+1)).
  const double cu = u / stride - 0.5, cv = v / stride - 0.5;
  Tensor t({h, w});
  double total = 0.0;
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j) {
      const double dx = static_cast<double>(j) - cu, dy = static_cast<double>(i) - cv;
      const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      t[i * w + j] = g;
      total += g;
    }
  for (auto& x : t.data()) x /= total;
  return t;
}

Tensor compute_loss(const HeatmapStack& stack, std::span<const SkeletonSample* const> gt,
                    const TrainConfig& config) {
  const auto n = stack.log_probs.dim(0), joints = stack.log_probs.dim(1);
  const auto h = stack.log_probs.dim(2), w = stack.log_probs.dim(3);
  DFM_CHECK(static_cast<std::int64_t>(gt.size()) == n, "compute_loss: ", gt.size(),
            " targets for a batch of ", n);
  Tensor targets({n, joints, h, w});
  Tensor depth_targets({n, joints});
  for (std::int64_t b = 0; b < n; ++b) {
    const auto& s = *gt[static_cast<std::size_t>(b)];
    DFM_CHECK(s.joints.size() == joints, "compute_loss: sample has ", s.joints.size(),
              " joints, head predicts ", joints);
    const double root_z = s.joints.joints[static_cast<std::size_t>(s.joints.root)][2];
    for (std::int64_t j = 0; j < joints; ++j) {
      const auto& p = s.joints.joints[static_cast<std::size_t>(j)];
      const auto [u, v] = project(p, s.intrinsics);
      DFM_CHECK(u >= 0.0 && u < stack.stride * static_cast<double>(w) && v >= 0.0 &&
                    v < stack.stride * static_cast<double>(h),
                "compute_loss: joint ", j, " of sample ", b, " projects off the grid (", u,
                ", ", v, ")");
      const Tensor g = gaussian_target(u, v, h, w, stack.stride, config.target_sigma);
      std::copy(g.data().begin(), g.data().end(),
                targets.data().begin() + (b * joints + j) * h * w);
      depth_targets.at({b, j}) = p[2] - root_z;
    }
  }
  const double maps = static_cast<double>(n * joints);
  Tensor ce = ops::scale(ops::dot_const(stack.log_probs, targets), -1.0 / maps);
  Tensor l1 = ops::mean(ops::abs(ops::sub(stack.depth, depth_targets)));
  return ops::add(ops::scale(ce, config.heatmap_weight), ops::scale(l1, config.depth_weight));
}

// ---- optimizer -------------------------------------------------------------

void adam_step(const ParamList& params, AdamState& state, const AdamConfig& config) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad())
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<std::size_t>(params[i].tensor.numel()), 0.0);
      state.v[i].assign(static_cast<std::size_t>(params[i].tensor.numel()), 0.0);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor theta = params[i].tensor;
    auto values = theta.data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = theta.has_grad();
    const auto grad = has ? theta.grad() : std::span<const double>{};
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = has ? grad[k] : 0.0;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      values[k] -= config.lr * (mhat / (std::sqrt(vhat) + config.eps) +
                                config.weight_decay * values[k]);
    }
  }
}

// ---- evaluation ------------------------------------------------------------

EvalMetrics evaluate(PoseModel& model, std::span<const SkeletonSample> samples,
                     int batch_size) {
  DFM_CHECK(!samples.empty(), "evaluate: no samples");
  NoGrad no_grad;
  EvalMetrics out;
  double epe_total = 0.0;
  for (std::size_t start = 0; start < samples.size();
       start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const SkeletonSample*> batch;
    for (auto i = start; i < end; ++i) batch.push_back(&samples[i]);
    const HeatmapStack stack = model.forward(stack_images(batch), Mode::kEval);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& s = *batch[b];
      const double root_z = s.joints.joints[static_cast<std::size_t>(s.joints.root)][2];
      const JointSet pred =
          decode_soft_argmax(stack, static_cast<std::int64_t>(b), s.intrinsics, root_z);
      out.per_sample.push_back(mpjpe(pred, s.joints));
      epe_total += epe_root_aligned(pred, s.joints);
    }
  }
  const double n = static_cast<double>(samples.size());
  out.mpjpe = std::accumulate(out.per_sample.begin(), out.per_sample.end(), 0.0) / n;
  out.epe = epe_total / n;
  const auto thresholds = default_pck_thresholds();
  out.auc = auc_pck(out.per_sample, thresholds);
  return out;
}

// ---- checkpoints -----------------------------------------------------------

Checkpoint capture(const PoseModel& model, const AdamState& adam, const TrainConfig& config,
                   std::int64_t epoch, double heldout_mpjpe) {
  Checkpoint ckpt;
  ckpt.config_text = config.to_json();
  ckpt.config_hash = fnv1a(ckpt.config_text);
  ckpt.step = adam.step;
  ckpt.epoch = epoch;
  ckpt.heldout_mpjpe = heldout_mpjpe;
  const auto params = model.parameters();
  for (const auto& p : params) {
    auto v = p.tensor.data();
    ckpt.blobs.push_back({BlobKind::kParam, p.name, {v.begin(), v.end()}});
  }
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    ckpt.blobs.push_back({BlobKind::kAdamM, params[i].name, adam.m[i]});
    ckpt.blobs.push_back({BlobKind::kAdamV, params[i].name, adam.v[i]});
  }
  for (const auto& b : model.buffers()) {
    auto v = b.tensor.data();
    ckpt.blobs.push_back({BlobKind::kBuffer, b.name, {v.begin(), v.end()}});
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, PoseModel& model, AdamState& adam) {
  const auto params = model.parameters();
  const auto buffers = model.buffers();
  auto find = [&](BlobKind kind, const std::string& name,
                  std::int64_t numel) -> const std::vector<double>* {
    for (const auto& b : ckpt.blobs)
      if (b.kind == kind && b.name == name) {
        if (static_cast<std::int64_t>(b.values.size()) != numel)
          throw FormatError("checkpoint blob '" + name + "' has " +
                            std::to_string(b.values.size()) + " values, model expects " +
                            std::to_string(numel));
        return &b.values;
      }
    return nullptr;
  };
  auto copy_into = [](const std::vector<double>& src, Tensor dst) {
    std::copy(src.begin(), src.end(), dst.data().begin());
  };
  for (const auto& p : params) {
    const auto* v = find(BlobKind::kParam, p.name, p.tensor.numel());
    if (!v) throw FormatError("checkpoint lacks parameter '" + p.name + "'");
    copy_into(*v, p.tensor);
  }
  for (const auto& b : buffers) {
    const auto* v = find(BlobKind::kBuffer, b.name, b.tensor.numel());
    if (!v) throw FormatError("checkpoint lacks buffer '" + b.name + "'");
    copy_into(*v, b.tensor);
  }
  adam = AdamState{};
  adam.step = ckpt.step;
  bool any_moment = false;
  for (const auto& b : ckpt.blobs) any_moment |= b.kind == BlobKind::kAdamM;
  if (!any_moment) return;
  for (const auto& p : params) {
    const auto* m = find(BlobKind::kAdamM, p.name, p.tensor.numel());
    const auto* v = find(BlobKind::kAdamV, p.name, p.tensor.numel());
    if (!m || !v) throw FormatError("checkpoint lacks optimizer moments of '" + p.name + "'");
    adam.m.push_back(*m);
    adam.v.push_back(*v);
  }
}

// ---- training loop ---------------------------------------------------------

TrainResult train(const TrainConfig& config, std::span<const SkeletonSample> dataset,
                  const TrainOptions& options) {
  config.validate();
  DFM_CHECK(!dataset.empty(), "train: empty dataset");
  DFM_CHECK(config.train_count < static_cast<std::int64_t>(dataset.size()),
            "train: need held-out samples beyond the first ", config.train_count);
  const auto train_set = dataset.first(static_cast<std::size_t>(config.train_count));
  const auto heldout = dataset.subspan(static_cast<std::size_t>(config.train_count));

  PoseModel model(config);
  const ParamList params = model.parameters();
  AdamState adam;
  int start_epoch = 0;
  if (options.resume) {
    if (options.resume->config_hash != fnv1a(config.to_json()))
      throw FormatError("resume checkpoint was written for a different configuration");
    restore(*options.resume, model, adam);
    start_epoch = static_cast<int>(options.resume->epoch);
  }
  const AdamConfig adam_cfg{config.lr, 0.9, 0.999, 1e-8, config.weight_decay};

  TrainResult result;
  result.untrained_mpjpe = evaluate(model, heldout).mpjpe;
  result.best_mpjpe = std::numeric_limits<double>::infinity();
  result.last = capture(model, adam, config, start_epoch, result.untrained_mpjpe);

  auto abort_run = [&](const std::string& why) {
    if (!options.best_path.empty())
      save_checkpoint(result.last, options.best_path + ".last-good");
    throw NumericError("train: " + why + "; last good state is epoch " +
                       std::to_string(result.last.epoch));
  };

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = start_epoch + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(config.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const auto end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const SkeletonSample*> batch;
      for (auto i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      double loss_value = 0.0;
      {
        Tape tape;
        const HeatmapStack stack = model.forward(stack_images(batch), Mode::kTrain);
        const Tensor loss = compute_loss(stack, batch, config);
        loss_value = loss.item();
        if (!std::isfinite(loss_value))
          abort_run("non-finite loss at epoch " + std::to_string(epoch));
        tape.backward(loss);
      }
      try {
        adam_step(params, adam, adam_cfg);
      } catch (const NumericError& e) {
        abort_run(e.what());
      }
      for (const auto& p : params) p.tensor.zero_grad();
      loss_total += loss_value;
      ++batches;
    }

    const EvalMetrics metrics = evaluate(model, heldout);
    EpochRecord record{epoch, loss_total / static_cast<double>(batches), metrics.mpjpe,
                       metrics.epe, metrics.auc};
    result.history.push_back(record);
    result.last = capture(model, adam, config, epoch, metrics.mpjpe);
    if (metrics.mpjpe < result.best_mpjpe) {
      result.best_mpjpe = metrics.mpjpe;
      result.best_epoch = epoch;
      result.best = result.last;
      if (!options.best_path.empty()) save_checkpoint(result.best, options.best_path);
    }
    if (options.on_epoch) options.on_epoch(record);
  }
  return result;
}

}  // namespace dfm
