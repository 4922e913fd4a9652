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

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "cstrack/bbox.hpp"
#include "cstrack/image.hpp"
#include "cstrack/layers.hpp"

namespace cstrack {

enum class ModalityTag { rgb_only, depth, thermal, event };

ModalityTag parse_modality(std::string_view name);
std::string to_string(ModalityTag tag);

enum class ImageRole { rgb, x };

using ChannelMeans = std::array<double, 3>;

/// Per-dataset channel means used for input normalisation. RGB-only data is
/// fed through both interfaces, so its X means equal its RGB means.
ChannelMeans modality_means(ModalityTag tag, ImageRole role);

/// Subtracts the configured per-channel mean.
Image normalize_image(const Image& img, ModalityTag tag, ImageRole role);

/// One aligned RGB-X observation.
struct Frame {
  Image rgb;
  Image x;
  ModalityTag modality = ModalityTag::thermal;
  std::optional<BBox> gt;
};

/// Row-major patch matrix [N × 3p²]; within a patch the order is
/// (channel, dy, dx).
Tensor extract_patches(const Image& img, std::size_t patch);

/// Learned patch projection plus separate positional tables for the template
/// and search segments.
struct PatchEmbedding {
  Linear proj;  // [3p² × D]
  Var pos_template;
  Var pos_search;
  std::size_t patch = 8;

  static PatchEmbedding create(ParamStore& store, const std::string& name,
                               std::size_t patch, std::size_t dim,
                               std::size_t template_tokens,
                               std::size_t search_tokens, Rng& rng);
};

/// Projects patches and adds the positional table: [N × D].
Var patch_embed(const Image& img, std::size_t patch, const Linear& proj,
                const Var& pos);

/// [z⁰; zᵗ; s] for one modality with recorded segment boundaries.
struct TokenStream {
  Var tokens;  // [(2·n_z + n_s) × D]
  std::size_t n_z = 0;
  std::size_t n_s = 0;
  GridShape grid;

  std::size_t length() const { return 2 * n_z + n_s; }
};

TokenStream assemble_stream(const Var& z0, const Var& zt, const Var& s,
                            GridShape grid);

struct StreamSegments {
  Var z0, zt, s;
};
StreamSegments split_stream(const TokenStream& stream);

/// Images for one modality at one time step, already cropped.
struct ModalityCrops {
  Image initial_template;
  Image dynamic_template;
  Image search;
};

struct TokenizerConfig {
  std::size_t patch = 8;
  std::size_t dim = 32;
  std::size_t template_size = 16;
  std::size_t search_size = 32;
  bool shared_embedding = true;

  GridShape template_grid() const;
  GridShape search_grid() const;
};

/// Shared (or, for the ablation, per-modality) patch embedding.
class Tokenizer {
 public:
  static Tokenizer create(ParamStore& store, const TokenizerConfig& config,
                          Rng& rng);

  const TokenizerConfig& config() const { return config_; }
  const PatchEmbedding& embedding(ImageRole role) const;

  /// Normalises, embeds and assembles one modality's stream.
  TokenStream tokenize(const ModalityCrops& crops, ModalityTag tag,
                       ImageRole role) const;

 private:
  TokenizerConfig config_;
  PatchEmbedding rgb_;
  std::optional<PatchEmbedding> x_;
};

}  // namespace cstrack
