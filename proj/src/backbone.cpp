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

#include "cstrack/backbone.hpp"

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

EncoderBlock EncoderBlock::create(ParamStore& store, const std::string& name,
                                  std::size_t dim, std::size_t heads,
                                  std::size_t ffn_hidden, Rng& rng) {
  EncoderBlock b;
  b.norm1 = LayerNormParams::create(store, name + ".norm1", dim);
  b.attn = Attention::create(store, name + ".attn", dim, heads, rng);
  b.norm2 = LayerNormParams::create(store, name + ".norm2", dim);
  b.ffn = FeedForward::create(store, name + ".ffn", dim, ffn_hidden, rng);
  return b;
}

Var EncoderBlock::operator()(const Var& x,
                             std::vector<Tensor>* probabilities) const {
  const Var n1 = norm1(x);
  const Var h = add(x, attn(n1, n1, probabilities));
  return add(h, ffn(norm2(h)));
}

BackboneParams BackboneParams::create(ParamStore& store,
                                      const std::string& name, std::size_t dim,
                                      std::size_t layers, std::size_t heads,
                                      std::size_t ffn_hidden, Rng& rng) {
  BackboneParams p;
  for (std::size_t i = 0; i < layers; ++i) {
    p.blocks.push_back(EncoderBlock::create(
        store, name + ".block" + std::to_string(i), dim, heads, ffn_hidden, rng));
  }
  p.final_norm = LayerNormParams::create(store, name + ".final_norm", dim);
  return p;
}

Var encode_tokens(const Var& tokens, const BackboneParams& params,
                  std::vector<Tensor>* probabilities) {
  Var x = tokens;
  for (const EncoderBlock& b : params.blocks) x = b(x, probabilities);
  return params.final_norm(x);
}

CompactFeature encode(const CompactFeature& f_c, const BackboneParams& params,
                      std::vector<Tensor>* probabilities) {
  if (f_c.tokens.rows() != f_c.length()) {
    throw DimensionError("encode: token count " +
                         std::to_string(f_c.tokens.rows()) +
                         " disagrees with layout length " +
                         std::to_string(f_c.length()));
  }
  CompactFeature out = f_c;
  out.tokens = encode_tokens(f_c.tokens, params, probabilities);
  return out;
}

SplitFeatures split_features(const CompactFeature& f) {
  if (f.tokens.rows() != f.length() || f.grid.size() != f.n_s) {
    throw InternalError("split_features: segment boundaries are inconsistent");
  }
  const std::size_t q = f.n_q;
  const std::size_t z = f.search_begin();
  return {slice_rows(f.tokens, 0, q), slice_rows(f.tokens, q, 2 * q),
          slice_rows(f.tokens, 2 * q, z), slice_rows(f.tokens, z, f.length())};
}

}  // namespace cstrack
