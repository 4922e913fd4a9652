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
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cstrack/backbone.hpp"
#include "cstrack/guidance_head.hpp"
#include "cstrack/scm.hpp"
#include "cstrack/tcm.hpp"
#include "cstrack/tokenizer.hpp"

namespace cstrack {

/// compact: SCM then one transformer over 2N_q + N_zs tokens.
/// dual_symmetric: two identical branches with per-layer interaction MLPs.
/// dual_asymmetric: an RGB transformer branch with X injected through FFNs.
enum class FrameworkKind { compact, dual_symmetric, dual_asymmetric };

FrameworkKind parse_framework(const std::string& name);
std::string to_string(FrameworkKind kind);

struct ModelConfig {
  FrameworkKind framework = FrameworkKind::compact;
  std::size_t dim = 32;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t n_q = 4;
  std::size_t n_m = 4;
  std::size_t memory_length = 4;
  std::size_t patch = 8;
  std::size_t template_size = 16;
  std::size_t search_size = 32;
  std::size_t head_channels = 32;
  bool shared_embedding = true;
  ScmVariant scm_variant = ScmVariant::full;
  TcmMode tcm_mode = TcmMode::combined;
  bool use_tcm = true;
  double search_factor = 2.0;    // search side / sqrt(w·h)
  double template_factor = 1.0;  // template side / sqrt(w·h)
  std::optional<double> update_threshold;  // default depends on modality

  TokenizerConfig tokenizer() const;
  std::size_t template_tokens() const;
  std::size_t search_tokens() const;
  void validate() const;
};

/// Three-layer perceptron D → D → D → D with GELU between layers.
struct InteractionMlp {
  Linear fc1, fc2, fc3;
  static InteractionMlp create(ParamStore& store, const std::string& name,
                               std::size_t dim, Rng& rng);
  Var operator()(const Var& x) const;
};

struct SymmetricLayer {
  Attention sa_r, sa_x;
  FeedForward ffn_r, ffn_x;
  LayerNormParams n1_r, n1_x, n2_r, n2_x;
  InteractionMlp psi_ca, psi_ffn;  // shared by both directions
};

struct AsymmetricLayer {
  FeedForward ffn1, ffn2, ffn3, ffn4;  // X branch
  LayerNormParams nx1, nx2;
  Attention sa;  // RGB branch
  FeedForward ffn_rgb;
  LayerNormParams nr1, nr2, nr3;
};

/// One layer of each dual framework on per-modality token matrices.
std::pair<Var, Var> symmetric_layer(const SymmetricLayer& l, const Var& f_r,
                                    const Var& f_x);
std::pair<Var, Var> asymmetric_layer(const AsymmetricLayer& l, const Var& f_r,
                                     const Var& f_x);

struct SpatialOutput {
  Var s_c;  // [N_s × D]
  Var z_c;  // [2N_z × D]
  Var f_c;  // every encoded token, consumed by the query-mode decoder
  GridShape grid;
  /// Token count entering each backbone branch.
  std::vector<std::size_t> branch_lengths;
};

/// Owns its parameters; copies would alias them, so only moves are allowed.
class Model {
 public:
  static Model build(const ModelConfig& config, std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Tokenizer through backbone for one search image.
  SpatialOutput spatial(const ModalityCrops& rgb, const ModalityCrops& x,
                        ModalityTag tag) const;
  /// Temporal guidance of the search tokens by the memory M'.
  Var guided(const Var& s_c, const Var& memory) const;
  HeadOutput predict(const Var& s, GridShape grid) const;

  const TemporalQueryParams* temporal_queries() const {
    return tcm_query_ ? &*tcm_query_ : nullptr;
  }
  BackboneParams& backbone() { return backbone_; }
  std::vector<SymmetricLayer>& symmetric_layers() { return sym_; }

  std::vector<std::pair<std::string, std::size_t>> census() const;
  std::size_t parameter_count() const { return store_.count(); }

  /// Copies parameter values from a model built with the same config.
  void copy_parameters_from(const Model& other);

 private:
  Model() = default;

  ModelConfig config_;
  ParamStore store_;
  Tokenizer tokenizer_;
  ScmParams scm_;
  BackboneParams backbone_;
  std::vector<SymmetricLayer> sym_;
  std::vector<AsymmetricLayer> asym_;
  GuidanceParams tgm_;
  HeadParams head_;
  std::optional<TemporalQueryParams> tcm_query_;
};

/// Temporarily marks every parameter as a constant so forward passes build
/// no backward graph.
class NoGradScope {
 public:
  explicit NoGradScope(const ParamStore& store);
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  std::vector<std::pair<Var, bool>> saved_;
};

}  // namespace cstrack
