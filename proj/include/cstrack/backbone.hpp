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
#include <vector>

#include "cstrack/layers.hpp"
#include "cstrack/scm.hpp"

namespace cstrack {

/// Pre-norm transformer block: x + SA(LN x), then x + FFN(LN x).
struct EncoderBlock {
  LayerNormParams norm1, norm2;
  Attention attn;
  FeedForward ffn;

  static EncoderBlock create(ParamStore& store, const std::string& name,
                             std::size_t dim, std::size_t heads,
                             std::size_t ffn_hidden, Rng& rng);
  Var operator()(const Var& x, std::vector<Tensor>* probabilities = nullptr) const;
};

struct BackboneParams {
  std::vector<EncoderBlock> blocks;
  LayerNormParams final_norm;

  static BackboneParams create(ParamStore& store, const std::string& name,
                               std::size_t dim, std::size_t layers,
                               std::size_t heads, std::size_t ffn_hidden,
                               Rng& rng);
};

/// Runs every block over the token matrix followed by the final norm. Each
/// block's per-head attention matrices are appended to `probabilities`.
Var encode_tokens(const Var& tokens, const BackboneParams& params,
                  std::vector<Tensor>* probabilities = nullptr);

/// Same-shape encoding with the segment layout carried through unchanged.
CompactFeature encode(const CompactFeature& f_c, const BackboneParams& params,
                      std::vector<Tensor>* probabilities = nullptr);

struct SplitFeatures {
  Var q_r;  // [N_q × D], empty when N_q = 0
  Var q_x;
  Var z_c;  // [2N_z × D]
  Var s_c;  // [N_s × D]
};

SplitFeatures split_features(const CompactFeature& f);

}  // namespace cstrack
