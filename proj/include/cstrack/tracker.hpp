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
#include <optional>
#include <string>
#include <vector>

#include "cstrack/model.hpp"
#include "cstrack/synthetic.hpp"

namespace cstrack {

/// Per-modality images for one step: templates plus search crop.
struct StepCrops {
  ModalityCrops rgb;
  ModalityCrops x;
};

/// Dynamic template images for both modalities.
struct TemplatePair {
  Image rgb;
  Image x;
};

/// Square window of side factor·sqrt(w·h) centred on `b`.
CropWindow box_window(const BBox& b, double factor, std::size_t out_size);

TemplatePair crop_template(const Frame& frame, const BBox& b,
                           std::size_t template_size, double factor);

/// Confidence threshold for replacing the dynamic template.
double default_update_threshold(ModalityTag tag);

/// Replaces `zt` with crops at `b` when confidence > threshold. The initial
/// template is held elsewhere and is never passed here. Returns whether the
/// template changed.
bool update_dynamic_template(TemplatePair& zt, double confidence,
                             double threshold, const Frame& frame,
                             const BBox& b, std::size_t template_size,
                             double template_factor);

struct FrameRecord {
  std::size_t frame = 0;
  BBox box;
  double confidence = 0.0;
  double iou = 0.0;
  double center_error = 0.0;
  bool template_updated = false;
  bool roi_fallback = false;
};

struct TrackResult {
  std::string sequence;
  std::vector<FrameRecord> frames;  // one per input frame, frame 0 is the init
  std::size_t memory_slots = 0;
  /// Per frame when requested: combined h, or normalised h_i without TCM.
  std::vector<Heatmap> heatmaps;
};

struct TrackOptions {
  /// Feed the RGB image through the X interface (cloned input ablation).
  bool rgb_only_input = false;
  bool keep_heatmaps = false;
};

/// Initialises on frame 0's ground truth and tracks the rest.
TrackResult run_tracker(const Model& model, const Sequence& sequence,
                        const TrackOptions& options = {});

struct Metrics {
  double precision = 0.0;    // centre error ≤ τ
  double success_auc = 0.0;  // mean success over IoU thresholds 0, 0.05, …, 1
  double mean_iou = 0.0;
  std::size_t frames = 0;
};

/// Scores frames after the initialisation frame; a frame succeeds at
/// threshold θ when IoU ≥ θ.
Metrics compute_metrics(const TrackResult& result, double tau = 20.0);
Metrics compute_metrics(const std::vector<TrackResult>& results,
                        double tau = 20.0);

}  // namespace cstrack
