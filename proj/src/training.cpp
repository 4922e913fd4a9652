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

#include "cstrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

void SgdMomentum::step(std::span<Var> params, double lr) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const Var& p : params) velocity_.emplace_back(p.shape(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].mutable_value();
    const Tensor g = params[i].grad();
    Tensor& v = velocity_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = momentum_ * v[k] + g[k] + weight_decay_ * w[k];
      w[k] -= lr * v[k];
    }
  }
}

void AdamW::step(std::span<Var> params, double lr) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const Var& p : params) {
      m_.emplace_back(p.shape(), 0.0);
      v_.emplace_back(p.shape(), 0.0);
    }
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].mutable_value();
    const Tensor g = params[i].grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m_[i][k] = beta1_ * m_[i][k] + (1 - beta1_) * g[k];
      v_[i][k] = beta2_ * v_[i][k] + (1 - beta2_) * g[k] * g[k];
      const double mh = m_[i][k] / c1, vh = v_[i][k] / c2;
      w[k] -= lr * (mh / (std::sqrt(vh) + eps_) + weight_decay_ * w[k]);
    }
  }
}

double clip_grad_norm(std::span<Var> params, double max_norm) {
  double sq = 0.0;
  for (const Var& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.node()->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const Var& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.node()->grad.values()) g *= s;
    }
  }
  return norm;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("train." + field + ": " + why);
  };
  if (optimizer != "sgd" && optimizer != "adamw")
    fail("optimizer", "must be 'sgd' or 'adamw'");
  if (!(lr_stage1 > 0.0)) fail("lr_stage1", "must be positive");
  if (!(lr_stage2 > 0.0)) fail("lr_stage2", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2", "must lie in (0, 1)");
  if (weight_decay < 0.0) fail("weight_decay", "must be non-negative");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (stage2_frames < 2) fail("stage2_frames", "must be at least 2");
  if (shift_jitter < 0.0 || shift_jitter >= 0.5) fail("shift_jitter", "must lie in [0, 0.5)");
  if (scale_jitter < 0.0) fail("scale_jitter", "must be non-negative");
}

std::unique_ptr<Optimizer> TrainConfig::make_optimizer() const {
  if (optimizer == "adamw")
    return std::make_unique<AdamW>(momentum, beta2, 1e-8, weight_decay);
  return std::make_unique<SgdMomentum>(momentum, weight_decay);
}

std::vector<std::string> stage_prefixes(const Model& model, int stage) {
  if (stage == 2) return {"tgm", "head", "tcm_query"};
  (void)model;
  return {"embed", "scm", "backbone", "branch_rgb", "branch_x", "interaction",
          "head"};
}

void set_trainable_prefixes(Model& model,
                            const std::vector<std::string>& prefixes) {
  model.params().set_trainable("", false);
  for (const std::string& p : prefixes) model.params().set_trainable(p, true);
}

TrainingView sample_view(const Sequence& seq, std::size_t search_frame,
                         const TemplatePair& z0, const TemplatePair& zt,
                         const ModelConfig& cfg, const TrainConfig& tc,
                         Rng& rng) {
  const Frame& f = seq.frames.at(search_frame);
  const BBox gt = *f.gt;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double scale = std::exp(tc.scale_jitter * u(rng));
  const double side =
      std::max(cfg.search_factor * std::sqrt(gt.w * gt.h) * scale, 4.0);
  const double cx = gt.x_c + tc.shift_jitter * side * u(rng);
  const double cy = gt.y_c + tc.shift_jitter * side * u(rng);
  const CropWindow win = centered_window(cx, cy, side, cfg.search_size);
  TrainingView v;
  v.crops.rgb = {z0.rgb, zt.rgb, crop_resample(f.rgb, win)};
  v.crops.x = {z0.x, zt.x, crop_resample(f.x, win)};
  v.target = win.to_window(gt);
  return v;
}

namespace {

TemplatePair template_at(const Sequence& seq, std::size_t frame,
                         const ModelConfig& cfg) {
  return crop_template(seq.frames.at(frame), *seq.frames.at(frame).gt,
                       cfg.template_size, cfg.template_factor);
}

LossBreakdown scaled_sum(std::vector<LossBreakdown>& parts) {
  LossBreakdown out;
  const double inv = 1.0 / static_cast<double>(parts.size());
  std::vector<Var> totals;
  for (const LossBreakdown& p : parts) {
    totals.push_back(p.total);
    out.cls += p.cls * inv;
    out.iou += p.iou * inv;
    out.l1 += p.l1 * inv;
  }
  Var acc = totals.front();
  for (std::size_t i = 1; i < totals.size(); ++i) acc = add(acc, totals[i]);
  out.total = scale(acc, inv);
  return out;
}

}  // namespace

std::size_t frames_per_sample(int stage, const TrainConfig& tc) {
  return stage == 1 ? 1 : tc.stage2_frames;
}

LossBreakdown stage1_loss(const Model& model, const Sequence& seq,
                          std::size_t search_frame, std::size_t template_frame,
                          const TrainConfig& tc, Rng& rng) {
  const ModelConfig& cfg = model.config();
  const TemplatePair z0 = template_at(seq, 0, cfg);
  const TemplatePair zt = template_at(seq, template_frame, cfg);
  const TrainingView v = sample_view(seq, search_frame, z0, zt, cfg, tc, rng);
  const SpatialOutput sp =
      model.spatial(v.crops.rgb, v.crops.x, seq.frames[search_frame].modality);
  return head_loss(model.predict(sp.s_c, sp.grid), v.target, cfg.patch,
                   tc.weights);
}

LossBreakdown stage2_loss(const Model& model, const Sequence& seq,
                          std::size_t first_frame, const TrainConfig& tc,
                          Rng& rng) {
  const ModelConfig& cfg = model.config();
  const std::size_t frames = frames_per_sample(2, tc);
  if (first_frame + frames > seq.frames.size()) {
    throw ConfigError("stage-2 sample runs past the end of '" + seq.name + "'");
  }
  const TemplatePair z0 = template_at(seq, 0, cfg);
  const TemplatePair zt = template_at(seq, first_frame, cfg);
  TemporalMemory memory(cfg.memory_length, cfg.n_m, cfg.dim);
  std::vector<LossBreakdown> parts;
  for (std::size_t k = 0; k < frames; ++k) {
    const std::size_t t = first_frame + k;
    const TrainingView v = sample_view(seq, t, z0, zt, cfg, tc, rng);
    const SpatialOutput sp =
        model.spatial(v.crops.rgb, v.crops.x, seq.frames[t].modality);
    const Heatmap h_i =
        intermediate_heatmap(sp.s_c.value(), sp.z_c.value(), sp.grid);
    if (k == 0) memory.bootstrap_initial(select_tokens(sp.s_c, h_i, cfg.n_m));
    const HeadOutput out =
        model.predict(model.guided(sp.s_c, memory.concatenated()), sp.grid);
    parts.push_back(head_loss(out, v.target, cfg.patch, tc.weights));

    const Decoded dec = decode_bbox(out.score.value(), out.offset.value(),
                                    out.size.value(), sp.grid, cfg.patch);
    const Heatmap h_f = final_heatmap(dec.box, sp.grid, cfg.patch);
    SelectionInputs in;
    in.s_c = sp.s_c;
    in.grid = sp.grid;
    in.patch = cfg.patch;
    in.h_i = &h_i;
    in.h_f = &h_f;
    in.box = dec.box;
    in.query = model.temporal_queries();
    if (cfg.tcm_mode == TcmMode::query) {
      in.memory = memory.concatenated();
      in.f_c = sp.f_c;
    }
    const Selection sel = variant_select(cfg.tcm_mode, in, cfg.n_m);
    if (k == 0) {
      memory.bootstrap_final(sel.tokens);
    } else {
      memory.push(sel.tokens);
    }
  }
  return scaled_sum(parts);
}

std::vector<double> fit_fixed_batch(Model& model,
                                    const std::vector<FixedSample>& batch,
                                    const TrainConfig& tc, std::size_t steps) {
  tc.validate();
  if (batch.empty()) throw ConfigError("fit_fixed_batch: empty batch");
  set_trainable_prefixes(model, stage_prefixes(model, 1));
  std::vector<Var> params = model.params().trainable();
  std::unique_ptr<Optimizer> opt = tc.make_optimizer();
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> losses;
  for (std::size_t step = 0; step < steps; ++step) {
    model.params().zero_grad();
    double total = 0.0;
    for (const FixedSample& s : batch) {
      Rng rng(s.view_seed);
      const LossBreakdown l = stage1_loss(model, *s.sequence, s.search_frame,
                                          s.template_frame, tc, rng);
      backward(scale(l.total, inv));
      total += l.total.value().item() * inv;
    }
    losses.push_back(total);
    clip_grad_norm(params, tc.clip_norm);
    opt->step(params, tc.lr_stage1);
  }
  model.params().zero_grad();
  model.params().set_trainable("", true);
  return losses;
}

std::vector<LossRecord> train_stage(Model& model,
                                    const std::vector<Sequence>& data,
                                    const TrainConfig& tc, int stage,
                                    std::uint64_t seed,
                                    const TrainObserver& observer) {
  tc.validate();
  if (data.empty()) throw ConfigError("training needs at least one sequence");
  if (stage != 1 && stage != 2) throw UsageError("stage must be 1 or 2");
  for (const Sequence& s : data) {
    if (s.frames.size() < frames_per_sample(stage, tc) + 1) {
      throw ConfigError("sequence '" + s.name + "' is too short for stage " +
                        std::to_string(stage));
    }
    for (const Frame& f : s.frames)
      if (!f.gt) throw ConfigError("training sequence '" + s.name + "' lacks ground truth");
  }
  set_trainable_prefixes(model, stage_prefixes(model, stage));
  std::vector<Var> params = model.params().trainable();
  std::unique_ptr<Optimizer> opt = tc.make_optimizer();
  const std::size_t steps = stage == 1 ? tc.stage1_steps : tc.stage2_steps;
  const double base_lr = stage == 1 ? tc.lr_stage1 : tc.lr_stage2;
  Rng rng(seed ^ (stage == 1 ? 0x5151ULL : 0x5252ULL));
  std::vector<LossRecord> curve;
  for (std::size_t step = 0; step < steps; ++step) {
    model.params().zero_grad();
    LossRecord rec;
    rec.stage = stage;
    rec.step = step;
    for (std::size_t b = 0; b < tc.batch_size; ++b) {
      const Sequence& seq =
          data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
      const std::size_t n = seq.frames.size();
      LossBreakdown l;
      try {
        if (stage == 1) {
          const std::size_t j = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
          const std::size_t lo = j > tc.template_gap ? j - tc.template_gap : 0;
          const std::size_t i = std::uniform_int_distribution<std::size_t>(lo, j)(rng);
          l = stage1_loss(model, seq, j, i, tc, rng);
        } else {
          const std::size_t s = std::uniform_int_distribution<std::size_t>(
              1, n - frames_per_sample(2, tc))(rng);
          l = stage2_loss(model, seq, s, tc, rng);
        }
        backward(scale(l.total, 1.0 / static_cast<double>(tc.batch_size)));
      } catch (const NumericError& e) {
        throw NumericError("training diverged at stage " + std::to_string(stage) +
                           " step " + std::to_string(step) + ": " + e.what());
      }
      const double inv = 1.0 / static_cast<double>(tc.batch_size);
      rec.loss += l.total.value().item() * inv;
      rec.cls += l.cls * inv;
      rec.iou += l.iou * inv;
      rec.l1 += l.l1 * inv;
    }
    clip_grad_norm(params, tc.clip_norm);
    // Cosine decay to 10% of the base rate.
    const double progress = static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(steps, 1));
    const double lr = base_lr * (0.1 + 0.45 * (1.0 + std::cos(std::numbers::pi * progress)));
    opt->step(params, lr);
    curve.push_back(rec);
    if (observer) observer(rec);
  }
  model.params().zero_grad();
  model.params().set_trainable("", true);
  return curve;
}

std::vector<LossRecord> train_two_stage(Model& model,
                                        const std::vector<Sequence>& data,
                                        const TrainConfig& tc,
                                        std::uint64_t seed,
                                        const TrainObserver& observer) {
  std::vector<LossRecord> curve = train_stage(model, data, tc, 1, seed, observer);
  if (model.config().use_tcm) {
    const std::vector<LossRecord> s2 = train_stage(model, data, tc, 2, seed, observer);
    curve.insert(curve.end(), s2.begin(), s2.end());
  }
  return curve;
}

}  // namespace cstrack
