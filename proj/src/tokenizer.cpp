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

#include "cstrack/tokenizer.hpp"

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

ModalityTag parse_modality(std::string_view name) {
  if (name == "rgb_only") return ModalityTag::rgb_only;
  if (name == "depth") return ModalityTag::depth;
  if (name == "thermal") return ModalityTag::thermal;
  if (name == "event") return ModalityTag::event;
  throw ConfigError("unknown modality tag '" + std::string(name) + "'");
}

std::string to_string(ModalityTag tag) {
  switch (tag) {
    case ModalityTag::rgb_only: return "rgb_only";
    case ModalityTag::depth: return "depth";
    case ModalityTag::thermal: return "thermal";
    case ModalityTag::event: return "event";
  }
  throw ConfigError("invalid modality tag");
}

ChannelMeans modality_means(ModalityTag tag, ImageRole role) {
  const bool rgb = role == ImageRole::rgb;
  switch (tag) {
    case ModalityTag::rgb_only:  // LaSOT statistics
      return {0.456, 0.459, 0.426};
    case ModalityTag::depth:  // DepthTrack
      return rgb ? ChannelMeans{0.417, 0.414, 0.393}
                 : ChannelMeans{0.574, 0.456, 0.240};
    case ModalityTag::thermal:  // LasHeR
      return rgb ? ChannelMeans{0.500, 0.499, 0.471}
                 : ChannelMeans{0.372, 0.372, 0.368};
    case ModalityTag::event:  // VisEvent
      return rgb ? ChannelMeans{0.418, 0.375, 0.317}
                 : ChannelMeans{0.935, 0.904, 0.949};
  }
  throw ConfigError("invalid modality tag");
}

Image normalize_image(const Image& img, ModalityTag tag, ImageRole role) {
  const ChannelMeans means = modality_means(tag, role);
  Image out = img;
  const std::size_t plane = img.height * img.width;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) out.pixels[c * plane + i] -= means[c];
  return out;
}

Tensor extract_patches(const Image& img, std::size_t patch) {
  if (patch == 0 || img.height % patch != 0 || img.width % patch != 0) {
    throw ConfigError("patch size " + std::to_string(patch) +
                      " does not divide image " + std::to_string(img.height) +
                      "x" + std::to_string(img.width));
  }
  const std::size_t pr = img.height / patch;
  const std::size_t pc = img.width / patch;
  const std::size_t raw = 3 * patch * patch;
  Tensor out(Shape{pr * pc, raw});
  for (std::size_t r = 0; r < pr; ++r)
    for (std::size_t c = 0; c < pc; ++c) {
      double* dst = out.data() + (r * pc + c) * raw;
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t dy = 0; dy < patch; ++dy)
          for (std::size_t dx = 0; dx < patch; ++dx)
            *dst++ = img.at(ch, r * patch + dy, c * patch + dx);
    }
  return out;
}

PatchEmbedding PatchEmbedding::create(ParamStore& store,
                                      const std::string& name,
                                      std::size_t patch, std::size_t dim,
                                      std::size_t template_tokens,
                                      std::size_t search_tokens, Rng& rng) {
  PatchEmbedding e;
  e.patch = patch;
  e.proj = Linear::create(store, name + ".proj", 3 * patch * patch, dim, rng);
  e.pos_template = store.add(name + ".pos_template",
                             normal_init({template_tokens, dim}, 0.02, rng));
  e.pos_search = store.add(name + ".pos_search",
                           normal_init({search_tokens, dim}, 0.02, rng));
  return e;
}

Var patch_embed(const Image& img, std::size_t patch, const Linear& proj,
                const Var& pos) {
  const Tensor patches = extract_patches(img, patch);
  if (proj.weight.rows() != patches.cols()) {
    throw DimensionError("patch_embed: projection expects " +
                         std::to_string(proj.weight.rows()) +
                         " inputs, patches have " +
                         std::to_string(patches.cols()));
  }
  if (pos.rows() != patches.rows() || pos.cols() != proj.weight.cols()) {
    throw DimensionError("patch_embed: positional table shape " +
                         shape_to_string(pos.shape()) + " does not match " +
                         std::to_string(patches.rows()) + " tokens");
  }
  return add(proj(Var::constant(patches)), pos);
}

TokenStream assemble_stream(const Var& z0, const Var& zt, const Var& s,
                            GridShape grid) {
  if (z0.cols() != s.cols() || zt.cols() != s.cols()) {
    throw DimensionError("assemble_stream: token widths differ");
  }
  if (z0.rows() != zt.rows()) {
    throw DimensionError("assemble_stream: template token counts differ");
  }
  if (grid.size() != s.rows()) {
    throw DimensionError("assemble_stream: search grid does not cover tokens");
  }
  const Var parts[] = {z0, zt, s};
  return {concat_rows(parts), z0.rows(), s.rows(), grid};
}

StreamSegments split_stream(const TokenStream& stream) {
  const std::size_t nz = stream.n_z;
  return {slice_rows(stream.tokens, 0, nz),
          slice_rows(stream.tokens, nz, 2 * nz),
          slice_rows(stream.tokens, 2 * nz, 2 * nz + stream.n_s)};
}

GridShape TokenizerConfig::template_grid() const {
  return {template_size / patch, template_size / patch};
}

GridShape TokenizerConfig::search_grid() const {
  return {search_size / patch, search_size / patch};
}

Tokenizer Tokenizer::create(ParamStore& store, const TokenizerConfig& config,
                            Rng& rng) {
  if (config.patch == 0 || config.template_size % config.patch != 0 ||
      config.search_size % config.patch != 0) {
    throw ConfigError("patch size must divide template and search sizes");
  }
  Tokenizer t;
  t.config_ = config;
  const std::size_t nz = config.template_grid().size();
  const std::size_t ns = config.search_grid().size();
  if (config.shared_embedding) {
    t.rgb_ = PatchEmbedding::create(store, "embed", config.patch, config.dim,
                                    nz, ns, rng);
  } else {
    t.rgb_ = PatchEmbedding::create(store, "embed.rgb", config.patch,
                                    config.dim, nz, ns, rng);
    t.x_ = PatchEmbedding::create(store, "embed.x", config.patch, config.dim,
                                  nz, ns, rng);
  }
  return t;
}

const PatchEmbedding& Tokenizer::embedding(ImageRole role) const {
  if (role == ImageRole::x && x_) return *x_;
  return rgb_;
}

TokenStream Tokenizer::tokenize(const ModalityCrops& crops, ModalityTag tag,
                                ImageRole role) const {
  const PatchEmbedding& e = embedding(role);
  auto embed = [&](const Image& img, const Var& pos) {
    return patch_embed(normalize_image(img, tag, role), e.patch, e.proj, pos);
  };
  return assemble_stream(embed(crops.initial_template, e.pos_template),
                         embed(crops.dynamic_template, e.pos_template),
                         embed(crops.search, e.pos_search),
                         config_.search_grid());
}

}  // namespace cstrack
