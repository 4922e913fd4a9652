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

#include "cstrack/scm.hpp"

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

ScmVariant parse_scm_variant(const std::string& name) {
  if (name == "full") return ScmVariant::full;
  if (name == "no_queries") return ScmVariant::no_queries;
  if (name == "no_cross_attention") return ScmVariant::no_cross_attention;
  throw ConfigError("unknown SCM variant '" + name + "'");
}

std::string to_string(ScmVariant v) {
  switch (v) {
    case ScmVariant::full: return "full";
    case ScmVariant::no_queries: return "no_queries";
    case ScmVariant::no_cross_attention: return "no_cross_attention";
  }
  return "full";
}

ScmParams ScmParams::create(ParamStore& store, std::size_t dim,
                            std::size_t n_q, std::size_t heads,
                            std::size_t ffn_hidden, Rng& rng) {
  ScmParams p;
  p.n_q = n_q;
  if (n_q > 0) {
    p.q_r = store.add("scm.q_r", normal_init({n_q, dim}, 0.02, rng));
    p.q_x = store.add("scm.q_x", normal_init({n_q, dim}, 0.02, rng));
  }
  p.attn_r = Attention::create(store, "scm.attn_r", dim, heads, rng);
  p.attn_x = Attention::create(store, "scm.attn_x", dim, heads, rng);
  p.ffn_r = FeedForward::create(store, "scm.ffn_r", dim, ffn_hidden, rng);
  p.ffn_x = FeedForward::create(store, "scm.ffn_x", dim, ffn_hidden, rng);
  p.norm_attn_r = LayerNormParams::create(store, "scm.norm_attn_r", dim);
  p.norm_attn_x = LayerNormParams::create(store, "scm.norm_attn_x", dim);
  p.norm_ffn_r = LayerNormParams::create(store, "scm.norm_ffn_r", dim);
  p.norm_ffn_x = LayerNormParams::create(store, "scm.norm_ffn_x", dim);
  return p;
}

Var cross_attend_block(const Var& a, const Var& b, const Attention& attn,
                       const LayerNormParams& norm) {
  if (a.cols() != b.cols()) {
    throw DimensionError("cross_attend_block: widths differ");
  }
  return attend_residual(attn, norm, a, b);
}

Var compact_fuse(const Var& fr, const Var& fx) {
  if (fr.shape() != fx.shape()) {
    throw DimensionError("compact_fuse: shapes " + shape_to_string(fr.shape()) +
                         " and " + shape_to_string(fx.shape()) + " differ");
  }
  return add(fr, fx);
}

CompactFeature scm_forward(const TokenStream& f_r, const TokenStream& f_x,
                           const ScmParams& params, ScmVariant variant) {
  if (f_r.tokens.shape() != f_x.tokens.shape() || f_r.n_z != f_x.n_z ||
      f_r.n_s != f_x.n_s) {
    throw DimensionError("scm_forward: modality streams differ in layout");
  }
  if (f_r.tokens.cols() != params.dim()) {
    throw DimensionError("scm_forward: token width " +
                         std::to_string(f_r.tokens.cols()) +
                         " vs module width " + std::to_string(params.dim()));
  }
  if (variant == ScmVariant::no_queries && params.n_q != 0) {
    throw ConfigError("SCM 'no_queries' variant requires N_q = 0 parameters");
  }
  const std::size_t nq = params.n_q;

  Var a_r = f_r.tokens;
  Var a_x = f_x.tokens;
  if (nq > 0) {
    const Var rp[] = {params.q_r, f_r.tokens};
    const Var xp[] = {params.q_x, f_x.tokens};
    a_r = concat_rows(rp);
    a_x = concat_rows(xp);
  }

  const bool cross = variant != ScmVariant::no_cross_attention;
  // The X side attends to the RGB side *after* its own update.
  const Var r1 = cross_attend_block(a_r, cross ? a_x : a_r, params.attn_r,
                                    params.norm_attn_r);
  const Var x1 = cross_attend_block(a_x, cross ? r1 : a_x, params.attn_x,
                                    params.norm_attn_x);
  const Var r2 = ffn_residual(params.ffn_r, params.norm_ffn_r, r1);
  const Var x2 = ffn_residual(params.ffn_x, params.norm_ffn_x, x1);

  const std::size_t n = r2.rows();
  const Var fused = compact_fuse(slice_rows(r2, nq, n), slice_rows(x2, nq, n));

  CompactFeature out;
  out.n_q = nq;
  out.n_z = f_r.n_z;
  out.n_s = f_r.n_s;
  out.grid = f_r.grid;
  if (nq > 0) {
    const Var parts[] = {slice_rows(r2, 0, nq), slice_rows(x2, 0, nq), fused};
    out.tokens = concat_rows(parts);
  } else {
    out.tokens = fused;
  }
  return out;
}

}  // namespace cstrack
