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

#include "cstrack/guidance_head.hpp"

#include <algorithm>
#include <cmath>

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

GuidanceParams GuidanceParams::create(ParamStore& store,
                                      const std::string& name, std::size_t dim,
                                      std::size_t heads, std::size_t ffn_hidden,
                                      Rng& rng) {
  GuidanceParams p;
  p.attn = Attention::create(store, name + ".attn", dim, heads, rng);
  p.ffn = FeedForward::create(store, name + ".ffn", dim, ffn_hidden, rng);
  p.norm1 = LayerNormParams::create(store, name + ".norm1", dim);
  p.norm2 = LayerNormParams::create(store, name + ".norm2", dim);
  return p;
}

Var guide(const Var& s_c, const Var& memory, const GuidanceParams& params) {
  const Var s1 = attend_residual(params.attn, params.norm1, s_c, memory);
  return ffn_residual(params.ffn, params.norm2, s1);
}

Var guide(const Var& s_c, const TemporalMemory& memory,
          const GuidanceParams& params) {
  return guide(s_c, memory.concatenated(), params);
}

ConvBranch ConvBranch::create(ParamStore& store, const std::string& name,
                              std::size_t dim, std::size_t channels,
                              std::size_t outputs, Rng& rng) {
  ConvBranch b;
  b.conv1 = Linear::create(store, name + ".conv1", 9 * dim, channels, rng);
  b.conv2 = Linear::create(store, name + ".conv2", 9 * channels, channels, rng);
  b.out = Linear::create(store, name + ".out", channels, outputs, rng);
  return b;
}

Var ConvBranch::operator()(const Var& x, GridShape grid) const {
  const Var h1 = gelu(conv1(neighbours3x3(x, grid.rows, grid.cols)));
  const Var h2 = gelu(conv2(neighbours3x3(h1, grid.rows, grid.cols)));
  return out(h2);
}

HeadParams HeadParams::create(ParamStore& store, const std::string& name,
                              std::size_t dim, std::size_t channels, Rng& rng) {
  HeadParams p;
  p.score = ConvBranch::create(store, name + ".score", dim, channels, 1, rng);
  p.offset = ConvBranch::create(store, name + ".offset", dim, channels, 2, rng);
  p.size = ConvBranch::create(store, name + ".size", dim, channels, 2, rng);
  return p;
}

HeadOutput head_forward(const Var& s_cm, GridShape grid,
                        const HeadParams& params) {
  return {params.score(s_cm, grid), sigmoid(params.offset(s_cm, grid)),
          sigmoid(params.size(s_cm, grid)), grid};
}

Decoded decode_bbox(const Tensor& score, const Tensor& offset,
                    const Tensor& size, GridShape grid, std::size_t patch) {
  const std::size_t n = grid.size();
  if (n == 0 || score.size() != n || offset.size() != 2 * n ||
      size.size() != 2 * n) {
    throw DimensionError("decode_bbox: maps do not share the grid");
  }
  Decoded d;
  const auto values = score.values();
  const auto best = std::max_element(values.begin(), values.end());
  d.index = static_cast<std::size_t>(best - values.begin());
  d.degenerate = std::all_of(values.begin(), values.end(),
                             [&](double v) { return v == *best; });
  if (d.degenerate) d.index = 0;
  const std::size_t row = d.index / grid.cols;
  const std::size_t col = d.index % grid.cols;
  const auto p = static_cast<double>(patch);
  const double width = static_cast<double>(grid.cols) * p;
  const double height = static_cast<double>(grid.rows) * p;
  d.box.x_c = (static_cast<double>(col) + offset[2 * d.index]) * p;
  d.box.y_c = (static_cast<double>(row) + offset[2 * d.index + 1]) * p;
  d.box.w = std::max(size[2 * d.index] * width, 1e-6);
  d.box.h = std::max(size[2 * d.index + 1] * height, 1e-6);
  d.confidence = 1.0 / (1.0 + std::exp(-score[d.index]));
  return d;
}

std::size_t center_cell(const BBox& b, GridShape grid, std::size_t patch) {
  const auto p = static_cast<double>(patch);
  const auto clamp_axis = [p](double v, std::size_t cells) {
    const double c = std::floor(v / p);
    return static_cast<std::size_t>(
        std::clamp(c, 0.0, static_cast<double>(cells - 1)));
  };
  return clamp_axis(b.y_c, grid.rows) * grid.cols + clamp_axis(b.x_c, grid.cols);
}

Tensor gt_score_map(const BBox& gt, GridShape grid, std::size_t patch) {
  const std::size_t peak = center_cell(gt, grid, patch);
  BBox at_cell = gt;
  at_cell.x_c = patch_center(peak % grid.cols, patch);
  at_cell.y_c = patch_center(peak / grid.cols, patch);
  Tensor map = final_heatmap(at_cell, grid, patch).values;
  map[peak] = 1.0;
  return map.reshaped({grid.size(), 1});
}

Tensor normalized_box(const BBox& b, double width, double height) {
  return Tensor::matrix(1, 4, {b.x_c / width, b.y_c / height, b.w / width,
                               b.h / height});
}

Var predicted_box(const HeadOutput& out, std::size_t index) {
  if (index >= out.grid.size()) {
    throw DimensionError("predicted_box: cell index out of range");
  }
  const double row = static_cast<double>(index / out.grid.cols);
  const double col = static_cast<double>(index % out.grid.cols);
  const std::size_t idx[] = {index};
  const Var off = gather_rows(out.offset, idx);  // [1 × 2]
  const Var sz = gather_rows(out.size, idx);
  const Var cell = Var::constant(Tensor::matrix(1, 2, {col, row}));
  const Var inv = Var::constant(Tensor::matrix(
      1, 2, {1.0 / static_cast<double>(out.grid.cols),
             1.0 / static_cast<double>(out.grid.rows)}));
  const Var parts[] = {mul(add(cell, off), inv), sz};
  return concat_cols(parts);
}

namespace {

struct Edges {
  Var l, t, r, b;
};

Edges edges(const Var& box) {
  const Var cx = slice_cols(box, 0, 1), cy = slice_cols(box, 1, 2);
  const Var hw = scale(slice_cols(box, 2, 3), 0.5);
  const Var hh = scale(slice_cols(box, 3, 4), 0.5);
  return {sub(cx, hw), sub(cy, hh), add(cx, hw), add(cy, hh)};
}

void check_box(const Var& b, const char* what) {
  if (b.value().size() != 4) {
    throw DimensionError(std::string(what) + ": boxes must have 4 entries");
  }
}

}  // namespace

Var giou_loss(const Var& a, const Var& b) {
  check_box(a, "giou_loss");
  check_box(b, "giou_loss");
  const Var a4 = reshape(a, {1, 4}), b4 = reshape(b, {1, 4});
  const Edges ea = edges(a4), eb = edges(b4);
  const Var zero = Var::constant(Tensor::matrix(1, 1, {0.0}));
  const Var iw = maximum(sub(minimum(ea.r, eb.r), maximum(ea.l, eb.l)), zero);
  const Var ih = maximum(sub(minimum(ea.b, eb.b), maximum(ea.t, eb.t)), zero);
  const Var inter = mul(iw, ih);
  const Var area_a = mul(slice_cols(a4, 2, 3), slice_cols(a4, 3, 4));
  const Var area_b = mul(slice_cols(b4, 2, 3), slice_cols(b4, 3, 4));
  const Var uni = sub(add(area_a, area_b), inter);
  const Var cw = sub(maximum(ea.r, eb.r), minimum(ea.l, eb.l));
  const Var ch = sub(maximum(ea.b, eb.b), minimum(ea.t, eb.t));
  const Var enclose = mul(cw, ch);
  const Var g = sub(div(inter, uni), div(sub(enclose, uni), enclose));
  return sum(scale(add_scalar(g, -1.0), -1.0));
}

Var l1_loss(const Var& a, const Var& b) {
  check_box(a, "l1_loss");
  check_box(b, "l1_loss");
  return mean(abs(sub(reshape(a, {1, 4}), reshape(b, {1, 4}))));
}

LossBreakdown total_loss(const Var& score_logits, const Tensor& gt_map,
                         const Var& box, const Var& gt_box,
                         const LossWeights& weights) {
  const Var cls = focal_loss(score_logits, gt_map);
  const Var iou = giou_loss(box, gt_box);
  const Var l1 = l1_loss(box, gt_box);
  LossBreakdown out;
  out.cls = cls.value().item();
  out.iou = iou.value().item();
  out.l1 = l1.value().item();
  out.total = add(cls, add(scale(iou, weights.iou), scale(l1, weights.l1)));
  if (!std::isfinite(out.total.value().item())) {
    throw NumericError("total_loss: non-finite loss");
  }
  return out;
}

LossBreakdown head_loss(const HeadOutput& out, const BBox& gt,
                        std::size_t patch, const LossWeights& weights) {
  const double width = static_cast<double>(out.grid.cols * patch);
  const double height = static_cast<double>(out.grid.rows * patch);
  const Tensor map = gt_score_map(gt, out.grid, patch);
  const Var box = predicted_box(out, center_cell(gt, out.grid, patch));
  return total_loss(out.score, map, box,
                    Var::constant(normalized_box(gt, width, height)), weights);
}

}  // namespace cstrack
