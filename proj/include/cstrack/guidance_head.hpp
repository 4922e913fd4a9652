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

#include "cstrack/bbox.hpp"
#include "cstrack/layers.hpp"
#include "cstrack/tcm.hpp"

namespace cstrack {

/// Decoder layer that lets search tokens read the temporal memory.
struct GuidanceParams {
  Attention attn;
  FeedForward ffn;
  LayerNormParams norm1, norm2;

  static GuidanceParams create(ParamStore& store, const std::string& name,
                               std::size_t dim, std::size_t heads,
                               std::size_t ffn_hidden, Rng& rng);
};

/// s' = Norm(s_c + CA(s_c, M')), s_cm = Norm(s' + FFN(s')).
Var guide(const Var& s_c, const Var& memory, const GuidanceParams& params);
Var guide(const Var& s_c, const TemporalMemory& memory,
          const GuidanceParams& params);

/// conv3x3 → GELU → conv3x3 → GELU → 1×1 over tokens laid out on the grid.
struct ConvBranch {
  Linear conv1;  // [9·D × C]
  Linear conv2;  // [9·C × C]
  Linear out;    // [C × k]

  static ConvBranch create(ParamStore& store, const std::string& name,
                           std::size_t dim, std::size_t channels,
                           std::size_t outputs, Rng& rng);
  Var operator()(const Var& x, GridShape grid) const;
};

struct HeadParams {
  ConvBranch score;   // 1 logit per token
  ConvBranch offset;  // sub-cell (dx, dy) after sigmoid
  ConvBranch size;    // (w, h) as a fraction of the search image, sigmoid

  static HeadParams create(ParamStore& store, const std::string& name,
                           std::size_t dim, std::size_t channels, Rng& rng);
};

struct HeadOutput {
  Var score;   // [N_s × 1] logits
  Var offset;  // [N_s × 2] in (0, 1)
  Var size;    // [N_s × 2] in (0, 1)
  GridShape grid;
};

HeadOutput head_forward(const Var& s_cm, GridShape grid,
                        const HeadParams& params);

struct Decoded {
  BBox box;  // search-image pixels
  double confidence = 0.0;
  std::size_t index = 0;
  bool degenerate = false;  // all scores equal
};

/// Box at the score argmax: x_c = (col + dx)·p, w = size_w·W.
Decoded decode_bbox(const Tensor& score, const Tensor& offset,
                    const Tensor& size, GridShape grid, std::size_t patch);

/// Grid cell containing the box centre, clamped to the grid.
std::size_t center_cell(const BBox& b, GridShape grid, std::size_t patch);

/// Focal-loss target: 1 at the cell containing the centre, elsewhere a
/// Gaussian (σ = w/3, h/3) around that cell's centre.
Tensor gt_score_map(const BBox& gt, GridShape grid, std::size_t patch);

/// Normalised (x_c, y_c, w, h) of `b` inside a W×H image, as [1 × 4].
Tensor normalized_box(const BBox& b, double width, double height);

/// Differentiable normalised box predicted at grid cell `index`.
Var predicted_box(const HeadOutput& out, std::size_t index);

/// 1 − GIoU between [1 × 4] centre-form boxes.
Var giou_loss(const Var& a, const Var& b);

/// Mean absolute error over the four normalised coordinates.
Var l1_loss(const Var& a, const Var& b);

struct LossWeights {
  double iou = 2.0;
  double l1 = 5.0;
};

struct LossBreakdown {
  Var total;
  double cls = 0.0;
  double iou = 0.0;
  double l1 = 0.0;
};

LossBreakdown total_loss(const Var& score_logits, const Tensor& gt_map,
                         const Var& box, const Var& gt_box,
                         const LossWeights& weights = {});

/// Full training loss for one search image; the box term is read at the
/// ground-truth centre cell.
LossBreakdown head_loss(const HeadOutput& out, const BBox& gt,
                        std::size_t patch, const LossWeights& weights = {});

}  // namespace cstrack
