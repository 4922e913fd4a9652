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

#include "cstrack/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

CropWindow box_window(const BBox& b, double factor, std::size_t out_size) {
  const double side = std::max(factor * std::sqrt(b.w * b.h), 4.0);
  return centered_window(b.x_c, b.y_c, side, out_size);
}

TemplatePair crop_template(const Frame& frame, const BBox& b,
                           std::size_t template_size, double factor) {
  const CropWindow w = box_window(b, factor, template_size);
  return {crop_resample(frame.rgb, w), crop_resample(frame.x, w)};
}

double default_update_threshold(ModalityTag tag) {
  return tag == ModalityTag::thermal ? 0.45 : 0.7;
}

bool update_dynamic_template(TemplatePair& zt, double confidence,
                             double threshold, const Frame& frame,
                             const BBox& b, std::size_t template_size,
                             double template_factor) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("update threshold must lie in (0, 1)");
  }
  if (!(confidence > threshold)) return false;
  zt = crop_template(frame, b, template_size, template_factor);
  return true;
}

namespace {

struct Tracker {
  const Model& model;
  const ModelConfig& cfg;
  TrackOptions options;
  TemplatePair z0, zt;
  TemporalMemory memory;
  BBox prev;

  Tracker(const Model& m, const TrackOptions& o)
      : model(m), cfg(m.config()), options(o),
        memory(m.config().memory_length, m.config().n_m, m.config().dim) {}

  StepCrops crops(const Frame& f, const CropWindow& w) const {
    StepCrops c;
    c.rgb = {z0.rgb, zt.rgb, crop_resample(f.rgb, w)};
    c.x = {z0.x, zt.x, crop_resample(f.x, w)};
    return c;
  }

  Selection select(const SpatialOutput& sp, const Heatmap& h_i,
                   const Heatmap& h_f, const BBox& box) const {
    SelectionInputs in;
    in.s_c = sp.s_c;
    in.grid = sp.grid;
    in.patch = cfg.patch;
    in.h_i = &h_i;
    in.h_f = &h_f;
    in.box = box;
    in.query = model.temporal_queries();
    if (cfg.tcm_mode == TcmMode::query) {
      in.memory = memory.concatenated();
      in.f_c = sp.f_c;
    }
    return variant_select(cfg.tcm_mode, in, cfg.n_m);
  }
};

Frame with_rgb_as_x(const Frame& f) {
  Frame out = f;
  out.x = f.rgb;
  return out;
}

}  // namespace

TrackResult run_tracker(const Model& model, const Sequence& sequence,
                        const TrackOptions& options) {
  if (sequence.frames.empty() || !sequence.frames.front().gt) {
    throw ConfigError("sequence '" + sequence.name +
                      "' needs a ground-truth box on its first frame");
  }
  const NoGradScope no_grad(model.params());
  const ModelConfig& cfg = model.config();
  Tracker tr(model, options);
  TrackResult result;
  result.sequence = sequence.name;
  const double threshold =
      cfg.update_threshold.value_or(default_update_threshold(sequence.frames[0].modality));

  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    const Frame frame = options.rgb_only_input ? with_rgb_as_x(sequence.frames[t])
                                               : sequence.frames[t];
    const double fw = static_cast<double>(frame.rgb.width);
    const double fh = static_cast<double>(frame.rgb.height);
    FrameRecord rec;
    rec.frame = t;
    if (t == 0) {
      const BBox init = *frame.gt;
      tr.z0 = crop_template(frame, init, cfg.template_size, cfg.template_factor);
      tr.zt = tr.z0;
      tr.prev = init;
      rec.box = init;
      rec.confidence = 1.0;
      rec.iou = 1.0;
    }
    const CropWindow win = box_window(tr.prev, cfg.search_factor, cfg.search_size);
    const StepCrops c = tr.crops(frame, win);
    const SpatialOutput sp = model.spatial(c.rgb, c.x, frame.modality);
    const Heatmap h_i = intermediate_heatmap(sp.s_c.value(), sp.z_c.value(), sp.grid);

    Var s_for_head = sp.s_c;
    if (cfg.use_tcm) {
      if (t == 0) tr.memory.bootstrap_initial(select_tokens(sp.s_c, h_i, cfg.n_m));
      s_for_head = model.guided(sp.s_c, tr.memory.concatenated());
    }
    const HeadOutput head = model.predict(s_for_head, sp.grid);
    const Decoded dec = decode_bbox(head.score.value(), head.offset.value(),
                                    head.size.value(), sp.grid, cfg.patch);
    BBox in_frame = clamp_box(win.to_frame(dec.box), fw, fh);

    if (cfg.use_tcm) {
      const Heatmap h_f = final_heatmap(dec.box, sp.grid, cfg.patch);
      const Selection sel = tr.select(sp, h_i, h_f, dec.box);
      rec.roi_fallback = sel.fell_back;
      if (t == 0) {
        tr.memory.bootstrap_final(sel.tokens);
      } else {
        tr.memory.push(sel.tokens);
      }
      if (options.keep_heatmaps) result.heatmaps.push_back(combine_heatmaps(h_i, h_f));
    } else if (options.keep_heatmaps) {
      result.heatmaps.push_back(min_max_normalize(h_i));
    }

    if (t == 0) {
      // The first frame only primes the memory; the output is the init box.
      result.frames.push_back(rec);
      continue;
    }
    rec.box = in_frame;
    rec.confidence = dec.confidence;
    rec.template_updated =
        update_dynamic_template(tr.zt, dec.confidence, threshold, frame, in_frame,
                                cfg.template_size, cfg.template_factor);
    tr.prev = in_frame;
    if (frame.gt) {
      rec.iou = iou(in_frame, *frame.gt);
      rec.center_error = center_distance(in_frame, *frame.gt);
    }
    result.frames.push_back(rec);
  }
  result.memory_slots = cfg.use_tcm ? tr.memory.slots().size() : 0;
  return result;
}

Metrics compute_metrics(const std::vector<TrackResult>& results, double tau) {
  Metrics m;
  std::vector<double> ious;
  std::size_t precise = 0;
  for (const TrackResult& r : results)
    for (std::size_t i = 1; i < r.frames.size(); ++i) {
      ious.push_back(r.frames[i].iou);
      precise += r.frames[i].center_error <= tau;
    }
  m.frames = ious.size();
  if (ious.empty()) return m;
  const auto n = static_cast<double>(ious.size());
  double total = 0.0;
  for (double v : ious) total += v;
  m.mean_iou = total / n;
  m.precision = static_cast<double>(precise) / n;
  double auc = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double th = k / 20.0;
    std::size_t ok = 0;
    for (double v : ious) ok += v >= th;
    auc += static_cast<double>(ok) / n;
  }
  m.success_auc = auc / 21.0;
  return m;
}

Metrics compute_metrics(const TrackResult& result, double tau) {
  return compute_metrics(std::vector<TrackResult>{result}, tau);
}

}  // namespace cstrack
