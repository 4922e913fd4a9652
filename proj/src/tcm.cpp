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

#include "cstrack/tcm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "cstrack/error.hpp"
#include "cstrack/image.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

Heatmap intermediate_heatmap(const Tensor& s_c, const Tensor& z_c,
                             GridShape grid) {
  if (s_c.cols() != z_c.cols()) {
    throw DimensionError("intermediate_heatmap: search width " +
                         std::to_string(s_c.cols()) + " vs template width " +
                         std::to_string(z_c.cols()));
  }
  if (grid.size() != s_c.rows()) {
    throw DimensionError("intermediate_heatmap: grid does not cover tokens");
  }
  const Tensor gram = kernels::matmul_nt(s_c, s_c);      // [N_s × N_s]
  const Tensor refined = kernels::matmul(gram, s_c);     // [N_s × D]
  const Tensor corr = kernels::matmul_nt(refined, z_c);  // [N_s × 2N_z]
  Heatmap h{Tensor(Shape{s_c.rows()}, 0.0), grid};
  const std::size_t nz = z_c.rows();
  if (nz == 0) return h;
  for (std::size_t i = 0; i < s_c.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nz; ++j) acc += corr.at(i, j);
    h.values[i] = acc / static_cast<double>(nz);
  }
  return h;
}

double patch_center(std::size_t k, std::size_t patch) {
  return (static_cast<double>(k) + 0.5) * static_cast<double>(patch);
}

Heatmap final_heatmap(const BBox& b, GridShape grid, std::size_t patch) {
  if (!(b.w > 0.0) || !(b.h > 0.0)) {
    throw DomainError("final_heatmap: box size must be positive");
  }
  const double sx = b.w / 3.0;
  const double sy = b.h / 3.0;
  Heatmap h{Tensor(Shape{grid.size()}), grid};
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const double dx = (patch_center(c, patch) - b.x_c) / sx;
      const double dy = (patch_center(r, patch) - b.y_c) / sy;
      h.values[r * grid.cols + c] = std::exp(-0.5 * (dx * dx + dy * dy));
    }
  return h;
}

Heatmap min_max_normalize(const Heatmap& h) {
  Heatmap out{Tensor(h.values.shape(), 0.0), h.grid};
  if (h.values.empty()) return out;
  const auto [lo, hi] =
      std::minmax_element(h.values.values().begin(), h.values.values().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    out.values[i] = std::clamp((h.values[i] - *lo) / range, 0.0, 1.0);
  }
  return out;
}

Heatmap combine_heatmaps(const Heatmap& h_i, const Heatmap& h_f) {
  if (h_i.grid != h_f.grid || h_i.values.size() != h_f.values.size()) {
    throw DimensionError("combine_heatmaps: grids differ");
  }
  const Heatmap a = min_max_normalize(h_i);
  const Heatmap b = min_max_normalize(h_f);
  Heatmap out{Tensor(h_i.values.shape()), h_i.grid};
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = 0.5 * a.values[i] + 0.5 * b.values[i];
  return out;
}

std::vector<std::size_t> top_indices(const Heatmap& h, std::size_t n) {
  if (n > h.values.size()) {
    throw ConfigError("cannot select " + std::to_string(n) + " of " +
                      std::to_string(h.values.size()) + " tokens");
  }
  std::vector<std::size_t> idx(h.values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return h.values[a] > h.values[b];
  });
  idx.resize(n);
  return idx;
}

Var select_tokens(const Var& s_c, const Heatmap& h, std::size_t n_m) {
  if (h.values.size() != s_c.rows()) {
    throw DimensionError("select_tokens: heatmap length " +
                         std::to_string(h.values.size()) + " vs " +
                         std::to_string(s_c.rows()) + " tokens");
  }
  const std::vector<std::size_t> idx = top_indices(h, n_m);
  return gather_rows(s_c, idx);
}

TemporalMemory::TemporalMemory(std::size_t length, std::size_t n_m,
                               std::size_t dim)
    : length_(length), n_m_(n_m), dim_(dim) {
  if (length == 0) throw ConfigError("temporal memory length must be positive");
}

void TemporalMemory::check_block(const Var& m) const {
  if (m.rows() != n_m_ || m.cols() != dim_) {
    throw DimensionError("temporal memory block " + shape_to_string(m.shape()) +
                         ", expected [" + std::to_string(n_m_) + ", " +
                         std::to_string(dim_) + "]");
  }
}

void TemporalMemory::bootstrap_initial(const Var& provisional) {
  if (phase_ != 0) {
    throw UsageError("memory bootstrap is only valid on the first frame");
  }
  check_block(provisional);
  slots_.assign(length_, provisional);
  phase_ = 1;
}

void TemporalMemory::bootstrap_final(const Var& first) {
  if (phase_ != 1) {
    throw UsageError("memory bootstrap is only valid on the first frame");
  }
  check_block(first);
  slots_.assign(length_, first);
  phase_ = 2;
  step_ = 1;
}

void TemporalMemory::push(const Var& m) {
  if (phase_ != 2) throw UsageError("memory push before bootstrap");
  check_block(m);
  slots_.pop_front();
  slots_.push_back(m);
  ++step_;
}

Var TemporalMemory::concatenated() const {
  if (phase_ == 0) throw UsageError("memory read before bootstrap");
  const std::vector<Var> parts(slots_.begin(), slots_.end());
  return concat_rows(parts);
}

TcmMode parse_tcm_mode(const std::string& name) {
  if (name == "roi") return TcmMode::roi;
  if (name == "query") return TcmMode::query;
  if (name == "h_i_only") return TcmMode::h_i_only;
  if (name == "h_f_only") return TcmMode::h_f_only;
  if (name == "combined") return TcmMode::combined;
  throw ConfigError("unknown TCM mode '" + name + "'");
}

std::string to_string(TcmMode mode) {
  switch (mode) {
    case TcmMode::roi: return "roi";
    case TcmMode::query: return "query";
    case TcmMode::h_i_only: return "h_i_only";
    case TcmMode::h_f_only: return "h_f_only";
    case TcmMode::combined: return "combined";
  }
  return "combined";
}

TemporalQueryParams TemporalQueryParams::create(
    ParamStore& store, const std::string& name, std::size_t n_m,
    std::size_t dim, std::size_t heads, std::size_t ffn_hidden, Rng& rng) {
  TemporalQueryParams p;
  p.m_q = store.add(name + ".m_q", normal_init({n_m, dim}, 0.02, rng));
  p.attn_memory = Attention::create(store, name + ".attn_memory", dim, heads, rng);
  p.attn_feature =
      Attention::create(store, name + ".attn_feature", dim, heads, rng);
  p.ffn = FeedForward::create(store, name + ".ffn", dim, ffn_hidden, rng);
  p.norm1 = LayerNormParams::create(store, name + ".norm1", dim);
  p.norm2 = LayerNormParams::create(store, name + ".norm2", dim);
  p.norm3 = LayerNormParams::create(store, name + ".norm3", dim);
  return p;
}

Var query_decode(const TemporalQueryParams& p, const Var& memory,
                 const Var& f_c) {
  const Var m1 = attend_residual(p.attn_memory, p.norm1, p.m_q, memory);
  const Var m2 = attend_residual(p.attn_feature, p.norm2, m1, f_c);
  return ffn_residual(p.ffn, p.norm3, m2);
}

std::vector<std::size_t> roi_indices(const BBox& scaled, GridShape grid,
                                     std::size_t patch, std::size_t n_m) {
  const double width = static_cast<double>(grid.cols * patch);
  const double height = static_cast<double>(grid.rows * patch);
  const double l = std::max(scaled.left(), 0.0);
  const double r = std::min(scaled.right(), width);
  const double t = std::max(scaled.top(), 0.0);
  const double b = std::min(scaled.bottom(), height);
  if (!(l < r) || !(t < b)) return {};

  std::vector<std::size_t> inside;
  for (std::size_t row = 0; row < grid.rows; ++row)
    for (std::size_t col = 0; col < grid.cols; ++col) {
      const double cx = patch_center(col, patch);
      const double cy = patch_center(row, patch);
      if (cx >= l && cx <= r && cy >= t && cy <= b)
        inside.push_back(row * grid.cols + col);
    }
  if (inside.size() == n_m) return inside;

  // Nearest-token resampling over a regular grid inside the clipped box.
  const auto gc = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(n_m))));
  const std::size_t gr = gc == 0 ? 0 : (n_m + gc - 1) / gc;
  std::vector<std::size_t> out;
  out.reserve(n_m);
  for (std::size_t i = 0; i < gr && out.size() < n_m; ++i)
    for (std::size_t j = 0; j < gc && out.size() < n_m; ++j) {
      const double px = l + (static_cast<double>(j) + 0.5) / gc * (r - l);
      const double py = t + (static_cast<double>(i) + 0.5) / gr * (b - t);
      const auto col = std::min<std::size_t>(
          static_cast<std::size_t>(px / static_cast<double>(patch)),
          grid.cols - 1);
      const auto row = std::min<std::size_t>(
          static_cast<std::size_t>(py / static_cast<double>(patch)),
          grid.rows - 1);
      out.push_back(row * grid.cols + col);
    }
  return out;
}

namespace {

Selection select_by(const Var& s_c, const Heatmap& h, std::size_t n_m) {
  Selection s;
  s.indices = top_indices(h, n_m);
  s.tokens = gather_rows(s_c, s.indices);
  return s;
}

const Heatmap& require(const Heatmap* h, const char* what) {
  if (h == nullptr) throw UsageError(std::string("TCM selection needs ") + what);
  return *h;
}

}  // namespace

Selection variant_select(TcmMode mode, const SelectionInputs& in,
                         std::size_t n_m) {
  if (n_m > in.grid.size()) {
    throw ConfigError("N_m = " + std::to_string(n_m) + " exceeds N_s = " +
                      std::to_string(in.grid.size()));
  }
  switch (mode) {
    case TcmMode::h_i_only:
      return select_by(in.s_c, require(in.h_i, "h_i"), n_m);
    case TcmMode::h_f_only:
      return select_by(in.s_c, require(in.h_f, "h_f"), n_m);
    case TcmMode::combined:
      return select_by(in.s_c,
                       combine_heatmaps(require(in.h_i, "h_i"),
                                        require(in.h_f, "h_f")),
                       n_m);
    case TcmMode::query: {
      if (in.query == nullptr || !in.memory.valid() || !in.f_c.valid()) {
        throw UsageError("query mode needs queries, memory and features");
      }
      Selection s;
      s.tokens = query_decode(*in.query, in.memory, in.f_c);
      return s;
    }
    case TcmMode::roi: {
      if (!in.box) throw UsageError("roi mode needs a box");
      BBox scaled = *in.box;
      scaled.w *= 1.5;
      scaled.h *= 1.5;
      Selection s;
      s.indices = roi_indices(scaled, in.grid, in.patch, n_m);
      if (s.indices.empty()) {
        s = select_by(in.s_c,
                      combine_heatmaps(require(in.h_i, "h_i"),
                                       require(in.h_f, "h_f")),
                      n_m);
        s.fell_back = true;
        return s;
      }
      s.tokens = gather_rows(in.s_c, s.indices);
      return s;
    }
  }
  throw InternalError("unhandled TCM mode");
}

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& h) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (std::size_t r = 0; r < h.grid.rows; ++r) {
    for (std::size_t c = 0; c < h.grid.cols; ++c) {
      if (c) out << ',';
      out << h.at(r, c);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_heatmap_pgm(const std::filesystem::path& path, const Heatmap& h) {
  write_pgm(path, h.values, h.grid.rows, h.grid.cols);
}

}  // namespace cstrack
