/* Copyright 2026 The CSTrack Desk Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cstrack/model.hpp"
#include "cstrack/synthetic.hpp"
#include "cstrack/tracker.hpp"

namespace cstrack {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Applies one update from the accumulated gradients.
  virtual void step(std::span<Var> params, double lr) = 0;
};

class SgdMomentum final : public Optimizer {
 public:
  SgdMomentum(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}
  void step(std::span<Var> params, double lr) override;

 private:
  double momentum_, weight_decay_;
  std::vector<Tensor> velocity_;
};

/// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}
  void step(std::span<Var> params, double lr) override;

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Rescales gradients so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
double clip_grad_norm(std::span<Var> params, double max_norm);

struct TrainConfig {
  std::string optimizer = "sgd";  // "sgd" or "adamw"
  double momentum = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  double lr_stage1 = 0.01;
  double lr_stage2 = 0.005;
  std::size_t stage1_steps = 600;
  std::size_t stage2_steps = 150;
  std::size_t batch_size = 8;
  std::size_t stage2_frames = 6;
  double clip_norm = 5.0;
  double shift_jitter = 0.2;  // centre shift, fraction of the crop side
  double scale_jitter = 0.2;  // log-uniform side scaling
  std::size_t template_gap = 10;
  LossWeights weights;

  void validate() const;
  std::unique_ptr<Optimizer> make_optimizer() const;
};

struct LossRecord {
  int stage = 1;
  std::size_t step = 0;
  double loss = 0.0;
  double cls = 0.0;
  double iou = 0.0;
  double l1 = 0.0;
};

using TrainObserver = std::function<void(const LossRecord&)>;

/// Prefixes trained in each stage; everything else is frozen.
std::vector<std::string> stage_prefixes(const Model& model, int stage);

/// Marks exactly the parameters under `prefixes` as trainable.
void set_trainable_prefixes(Model& model, const std::vector<std::string>& prefixes);

/// Builds one training step's crops around a jittered ground truth. The
/// returned box is in search-crop pixels.
struct TrainingView {
  StepCrops crops;
  BBox target;
};
TrainingView sample_view(const Sequence& seq, std::size_t search_frame,
                         const TemplatePair& z0, const TemplatePair& zt,
                         const ModelConfig& cfg, const TrainConfig& tc,
                         Rng& rng);

/// Loss of a stage-1 sample: one search image, no temporal modules.
LossBreakdown stage1_loss(const Model& model, const Sequence& seq,
                          std::size_t search_frame, std::size_t template_frame,
                          const TrainConfig& tc, Rng& rng);

/// Loss of a stage-2 sample: `tc.stage2_frames` consecutive search images
/// with the memory bootstrapped on the first of them.
LossBreakdown stage2_loss(const Model& model, const Sequence& seq,
                          std::size_t first_frame, const TrainConfig& tc,
                          Rng& rng);

/// Search images per training sample: 1 in stage 1, `stage2_frames` in
/// stage 2.
std::size_t frames_per_sample(int stage, const TrainConfig& tc);

/// A stage-1 sample pinned down completely, view jitter included.
struct FixedSample {
  const Sequence* sequence = nullptr;
  std::size_t search_frame = 1;
  std::size_t template_frame = 0;
  std::uint64_t view_seed = 0;
};

/// Stage-1 updates on one fixed batch at the stage-1 base rate; returns the
/// batch loss measured before each update.
std::vector<double> fit_fixed_batch(Model& model,
                                    const std::vector<FixedSample>& batch,
                                    const TrainConfig& tc, std::size_t steps);

std::vector<LossRecord> train_stage(Model& model,
                                    const std::vector<Sequence>& data,
                                    const TrainConfig& tc, int stage,
                                    std::uint64_t seed,
                                    const TrainObserver& observer = {});

std::vector<LossRecord> train_two_stage(Model& model,
                                        const std::vector<Sequence>& data,
                                        const TrainConfig& tc,
                                        std::uint64_t seed,
                                        const TrainObserver& observer = {});

}  // namespace cstrack
