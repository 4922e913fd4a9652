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
#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cstrack/bbox.hpp"
#include "cstrack/layers.hpp"

namespace cstrack {

/// Per-token score over the search grid, row-major.
struct Heatmap {
  Tensor values;  // [N_s]
  GridShape grid;

  double at(std::size_t row, std::size_t col) const {
    return values[row * grid.cols + col];
  }
};

/// h_i: s' = s_c·s_cᵀ·s_c (unscaled), then the mean over template tokens of
/// s'·z_cᵀ.
Heatmap intermediate_heatmap(const Tensor& s_c, const Tensor& z_c,
                             GridShape grid);

/// Pixel coordinate of the centre of the k-th patch along one axis.
double patch_center(std::size_t k, std::size_t patch);

/// h_f: Gaussian with σ = (w/3, h/3) evaluated at patch centres.
Heatmap final_heatmap(const BBox& b, GridShape grid, std::size_t patch);

/// Min-max to [0, 1]; a constant map becomes all zeros.
Heatmap min_max_normalize(const Heatmap& h);

/// 0.5·Norm(h_i) + 0.5·Norm(h_f).
Heatmap combine_heatmaps(const Heatmap& h_i, const Heatmap& h_f);

/// Indices of the n highest scores, descending; ties go to the lower index.
std::vector<std::size_t> top_indices(const Heatmap& h, std::size_t n);

/// Rows of s_c at top_indices(h, n_m), copied without modification.
Var select_tokens(const Var& s_c, const Heatmap& h, std::size_t n_m);

/// Sliding window of the last L selected token blocks, oldest first.
class TemporalMemory {
 public:
  TemporalMemory(std::size_t length, std::size_t n_m, std::size_t dim);

  /// Fills every slot with m'_1 (selected from h_i before the head runs).
  void bootstrap_initial(const Var& provisional);
  /// Overwrites every slot with m_1 once the first box is known.
  void bootstrap_final(const Var& first);
  /// Drops the oldest slot and appends `m`.
  void push(const Var& m);

  bool bootstrapped() const { return phase_ >= 1; }
  bool ready() const { return phase_ == 2; }
  std::size_t length() const { return length_; }
  std::size_t step() const { return step_; }
  const std::deque<Var>& slots() const { return slots_; }
  /// M' = [m_1; …; m_L], [(L·N_m) × D].
  Var concatenated() const;

 private:
  void check_block(const Var& m) const;

  std::size_t length_, n_m_, dim_;
  int phase_ = 0;  // 0 empty, 1 provisional, 2 live
  std::size_t step_ = 0;
  std::deque<Var> slots_;
};

enum class TcmMode { roi, query, h_i_only, h_f_only, combined };

TcmMode parse_tcm_mode(const std::string& name);
std::string to_string(TcmMode mode);

/// Learned temporal queries decoded against the memory and the compact
/// feature: m'_q = Norm(m_q + CA(m_q, M')), m''_q = Norm(m'_q + CA(m'_q, f_c)),
/// m_t = Norm(m''_q + FFN(m''_q)).
struct TemporalQueryParams {
  Var m_q;  // [N_m × D]
  Attention attn_memory, attn_feature;
  FeedForward ffn;
  LayerNormParams norm1, norm2, norm3;

  static TemporalQueryParams create(ParamStore& store, const std::string& name,
                                    std::size_t n_m, std::size_t dim,
                                    std::size_t heads, std::size_t ffn_hidden,
                                    Rng& rng);
};

Var query_decode(const TemporalQueryParams& params, const Var& memory,
                 const Var& f_c);

struct SelectionInputs {
  Var s_c;
  GridShape grid;
  std::size_t patch = 8;
  const Heatmap* h_i = nullptr;
  const Heatmap* h_f = nullptr;
  std::optional<BBox> box;  // search-image coordinates, roi mode
  const TemporalQueryParams* query = nullptr;
  Var memory;  // M'^{t−1}, query mode
  Var f_c;     // encoded compact feature, query mode
};

struct Selection {
  Var tokens;  // [N_m × D]
  std::vector<std::size_t> indices;  // empty in query mode
  bool fell_back = false;            // roi box missed the image
};

/// Indices used by the roi mode for a box already scaled by 1.5; empty when
/// the box does not overlap the image.
std::vector<std::size_t> roi_indices(const BBox& scaled, GridShape grid,
                                     std::size_t patch, std::size_t n_m);

Selection variant_select(TcmMode mode, const SelectionInputs& in,
                         std::size_t n_m);

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& h);
void write_heatmap_pgm(const std::filesystem::path& path, const Heatmap& h);

}  // namespace cstrack
