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

#include "cstrack/model.hpp"

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

FrameworkKind parse_framework(const std::string& name) {
  if (name == "compact") return FrameworkKind::compact;
  if (name == "dual_symmetric") return FrameworkKind::dual_symmetric;
  if (name == "dual_asymmetric") return FrameworkKind::dual_asymmetric;
  throw ConfigError("unknown framework '" + name + "'");
}

std::string to_string(FrameworkKind kind) {
  switch (kind) {
    case FrameworkKind::compact: return "compact";
    case FrameworkKind::dual_symmetric: return "dual_symmetric";
    case FrameworkKind::dual_asymmetric: return "dual_asymmetric";
  }
  return "compact";
}

TokenizerConfig ModelConfig::tokenizer() const {
  TokenizerConfig t;
  t.patch = patch;
  t.dim = dim;
  t.template_size = template_size;
  t.search_size = search_size;
  t.shared_embedding = shared_embedding;
  return t;
}

std::size_t ModelConfig::template_tokens() const {
  return (template_size / patch) * (template_size / patch);
}

std::size_t ModelConfig::search_tokens() const {
  return (search_size / patch) * (search_size / patch);
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("model." + field + ": " + why);
  };
  if (dim == 0) fail("dim", "must be positive");
  if (heads == 0 || dim % heads != 0) fail("heads", "must divide dim");
  if (layers == 0) fail("layers", "must be positive");
  if (ffn_mult == 0) fail("ffn_mult", "must be positive");
  if (patch == 0) fail("patch", "must be positive");
  if (template_size % patch != 0) fail("template_size", "must be a multiple of patch");
  if (search_size % patch != 0) fail("search_size", "must be a multiple of patch");
  if (head_channels == 0) fail("head_channels", "must be positive");
  if (memory_length == 0) fail("memory_length", "must be positive");
  if (n_m == 0 || n_m > search_tokens()) fail("n_m", "must lie in [1, N_s]");
  if (scm_variant == ScmVariant::no_queries && n_q != 0)
    fail("n_q", "must be 0 for the no_queries SCM variant");
  if (!(search_factor > 0.0)) fail("search_factor", "must be positive");
  if (!(template_factor > 0.0)) fail("template_factor", "must be positive");
  if (update_threshold && !(*update_threshold > 0.0 && *update_threshold < 1.0))
    fail("update_threshold", "must lie in (0, 1)");
}

InteractionMlp InteractionMlp::create(ParamStore& store, const std::string& name,
                                      std::size_t dim, Rng& rng) {
  return {Linear::create(store, name + ".fc1", dim, dim, rng),
          Linear::create(store, name + ".fc2", dim, dim, rng),
          Linear::create(store, name + ".fc3", dim, dim, rng)};
}

Var InteractionMlp::operator()(const Var& x) const {
  return fc3(gelu(fc2(gelu(fc1(x)))));
}

std::pair<Var, Var> symmetric_layer(const SymmetricLayer& l, const Var& f_r,
                                    const Var& f_x) {
  const Var r1 = l.n1_r(add(add(f_r, l.sa_r(f_r, f_r)), l.psi_ca(f_x)));
  const Var x1 = l.n1_x(add(add(f_x, l.sa_x(f_x, f_x)), l.psi_ca(f_r)));
  const Var r2 = l.n2_r(add(add(r1, l.ffn_r(r1)), l.psi_ffn(x1)));
  const Var x2 = l.n2_x(add(add(x1, l.ffn_x(x1)), l.psi_ffn(r1)));
  return {r2, x2};
}

std::pair<Var, Var> asymmetric_layer(const AsymmetricLayer& l, const Var& f_r,
                                     const Var& f_x) {
  const Var x1 = l.nx1(add(l.ffn1(f_x), l.ffn2(f_r)));
  const Var x2 = l.nx2(add(f_x, l.ffn3(x1)));
  const Var x_out = l.ffn4(x2);
  const Var r1 = l.nr1(add(f_r, l.sa(f_r, f_r)));
  const Var r2 = l.nr2(add(r1, l.ffn_rgb(r1)));
  const Var r_out = l.nr3(add(r2, x_out));
  return {r_out, x_out};
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  Rng rng(seed);
  const std::size_t d = config.dim;
  const std::size_t hidden = config.ffn_mult * d;
  m.tokenizer_ = Tokenizer::create(m.store_, config.tokenizer(), rng);
  switch (config.framework) {
    case FrameworkKind::compact:
      m.scm_ = ScmParams::create(m.store_, d, config.n_q, config.heads, hidden, rng);
      m.backbone_ = BackboneParams::create(m.store_, "backbone", d, config.layers,
                                           config.heads, hidden, rng);
      break;
    case FrameworkKind::dual_symmetric:
      for (std::size_t k = 0; k < config.layers; ++k) {
        const std::string r = "branch_rgb.layer" + std::to_string(k);
        const std::string x = "branch_x.layer" + std::to_string(k);
        const std::string i = "interaction.layer" + std::to_string(k);
        SymmetricLayer l;
        l.sa_r = Attention::create(m.store_, r + ".sa", d, config.heads, rng);
        l.ffn_r = FeedForward::create(m.store_, r + ".ffn", d, hidden, rng);
        l.n1_r = LayerNormParams::create(m.store_, r + ".norm1", d);
        l.n2_r = LayerNormParams::create(m.store_, r + ".norm2", d);
        l.sa_x = Attention::create(m.store_, x + ".sa", d, config.heads, rng);
        l.ffn_x = FeedForward::create(m.store_, x + ".ffn", d, hidden, rng);
        l.n1_x = LayerNormParams::create(m.store_, x + ".norm1", d);
        l.n2_x = LayerNormParams::create(m.store_, x + ".norm2", d);
        l.psi_ca = InteractionMlp::create(m.store_, i + ".psi_ca", d, rng);
        l.psi_ffn = InteractionMlp::create(m.store_, i + ".psi_ffn", d, rng);
        m.sym_.push_back(std::move(l));
      }
      break;
    case FrameworkKind::dual_asymmetric:
      for (std::size_t k = 0; k < config.layers; ++k) {
        const std::string r = "branch_rgb.layer" + std::to_string(k);
        const std::string x = "branch_x.layer" + std::to_string(k);
        AsymmetricLayer l;
        l.sa = Attention::create(m.store_, r + ".sa", d, config.heads, rng);
        l.ffn_rgb = FeedForward::create(m.store_, r + ".ffn", d, hidden, rng);
        l.nr1 = LayerNormParams::create(m.store_, r + ".norm1", d);
        l.nr2 = LayerNormParams::create(m.store_, r + ".norm2", d);
        l.nr3 = LayerNormParams::create(m.store_, r + ".norm3", d);
        l.ffn1 = FeedForward::create(m.store_, x + ".ffn1", d, d, rng);
        l.ffn2 = FeedForward::create(m.store_, x + ".ffn2", d, d, rng);
        l.ffn3 = FeedForward::create(m.store_, x + ".ffn3", d, d, rng);
        l.ffn4 = FeedForward::create(m.store_, x + ".ffn4", d, d, rng);
        l.nx1 = LayerNormParams::create(m.store_, x + ".norm1", d);
        l.nx2 = LayerNormParams::create(m.store_, x + ".norm2", d);
        m.asym_.push_back(std::move(l));
      }
      break;
  }
  m.tgm_ = GuidanceParams::create(m.store_, "tgm", d, config.heads, hidden, rng);
  m.head_ = HeadParams::create(m.store_, "head", d, config.head_channels, rng);
  if (config.tcm_mode == TcmMode::query) {
    m.tcm_query_ = TemporalQueryParams::create(m.store_, "tcm_query", config.n_m,
                                               d, config.heads, hidden, rng);
  }
  return m;
}

SpatialOutput Model::spatial(const ModalityCrops& rgb, const ModalityCrops& x,
                             ModalityTag tag) const {
  const TokenStream f_r = tokenizer_.tokenize(rgb, tag, ImageRole::rgb);
  const TokenStream f_x = tokenizer_.tokenize(x, tag, ImageRole::x);
  SpatialOutput out;
  out.grid = f_r.grid;
  if (config_.framework == FrameworkKind::compact) {
    const CompactFeature fc = scm_forward(f_r, f_x, scm_, config_.scm_variant);
    out.branch_lengths = {fc.tokens.rows()};
    const CompactFeature enc = encode(fc, backbone_);
    const SplitFeatures parts = split_features(enc);
    out.s_c = parts.s_c;
    out.z_c = parts.z_c;
    out.f_c = enc.tokens;
    return out;
  }
  Var r = f_r.tokens, xx = f_x.tokens;
  out.branch_lengths = {r.rows(), xx.rows()};
  if (config_.framework == FrameworkKind::dual_symmetric) {
    for (const SymmetricLayer& l : sym_) std::tie(r, xx) = symmetric_layer(l, r, xx);
  } else {
    for (const AsymmetricLayer& l : asym_) std::tie(r, xx) = asymmetric_layer(l, r, xx);
  }
  // Branch outputs are fused by addition ahead of the shared head.
  const Var fused = add(r, xx);
  const std::size_t z = 2 * f_r.n_z;
  out.z_c = slice_rows(fused, 0, z);
  out.s_c = slice_rows(fused, z, fused.rows());
  const Var both[] = {r, xx};
  out.f_c = concat_rows(both);
  return out;
}

Var Model::guided(const Var& s_c, const Var& memory) const {
  return guide(s_c, memory, tgm_);
}

HeadOutput Model::predict(const Var& s, GridShape grid) const {
  return head_forward(s, grid, head_);
}

std::vector<std::pair<std::string, std::size_t>> Model::census() const {
  return store_.census();
}

void Model::copy_parameters_from(const Model& other) {
  const auto& src = other.store_.params();
  auto& dst = store_.params();
  if (src.size() != dst.size()) {
    throw ConfigError("copy_parameters_from: models differ in structure");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name ||
        src[i].var.shape() != dst[i].var.shape()) {
      throw ConfigError("copy_parameters_from: parameter '" + dst[i].name +
                        "' does not match");
    }
    dst[i].var.mutable_value() = src[i].var.value();
  }
}

NoGradScope::NoGradScope(const ParamStore& store) {
  for (const NamedParam& p : store.params()) {
    Var v = p.var;
    saved_.emplace_back(v, v.requires_grad());
    v.set_requires_grad(false);
  }
}

NoGradScope::~NoGradScope() {
  for (auto& [v, flag] : saved_) v.set_requires_grad(flag);
}

}  // namespace cstrack
