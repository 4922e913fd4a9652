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
#include <string>

#include "cstrack/layers.hpp"
#include "cstrack/tokenizer.hpp"

namespace cstrack {

/// Spatial compact module ablations. The unshared-embedding ablation lives
/// in the tokenizer and runs this module in `full` mode.
enum class ScmVariant { full, no_queries, no_cross_attention };

ScmVariant parse_scm_variant(const std::string& name);
std::string to_string(ScmVariant v);

struct ScmParams {
  std::size_t n_q = 0;
  Var q_r;  // [N_q × D]; invalid when N_q = 0
  Var q_x;
  Attention attn_r;  // RGB side: queries [q_r; f_r], keys/values from X side
  Attention attn_x;  // X side: keys/values from the already-updated RGB side
  FeedForward ffn_r;
  FeedForward ffn_x;
  LayerNormParams norm_attn_r, norm_attn_x, norm_ffn_r, norm_ffn_x;

  static ScmParams create(ParamStore& store, std::size_t dim, std::size_t n_q,
                          std::size_t heads, std::size_t ffn_hidden, Rng& rng);
  std::size_t dim() const { return attn_r.q.weight.rows(); }
};

/// [q''_r | q''_x | f''_r + f''_x] with segment bookkeeping.
struct CompactFeature {
  Var tokens;  // [(2·N_q + N_zs) × D]
  std::size_t n_q = 0;
  std::size_t n_z = 0;
  std::size_t n_s = 0;
  GridShape grid;

  std::size_t length() const { return 2 * n_q + 2 * n_z + n_s; }
  std::size_t search_begin() const { return 2 * n_q + 2 * n_z; }
};

/// Norm(a + Φ_CA(a, b)): queries from `a`, keys and values from `b`.
Var cross_attend_block(const Var& a, const Var& b, const Attention& attn,
                       const LayerNormParams& norm);

/// Elementwise sum of the two refined modality streams.
Var compact_fuse(const Var& fr, const Var& fx);

CompactFeature scm_forward(const TokenStream& f_r, const TokenStream& f_x,
                           const ScmParams& params,
                           ScmVariant variant = ScmVariant::full);

}  // namespace cstrack
