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

#include "cstrack/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "cstrack/error.hpp"

namespace cstrack {

ScenarioKind parse_scenario(const std::string& name) {
  if (name == "clean") return ScenarioKind::clean;
  if (name == "rgb_advantage") return ScenarioKind::rgb_advantage;
  if (name == "x_advantage") return ScenarioKind::x_advantage;
  if (name == "modality_missing") return ScenarioKind::modality_missing;
  throw ConfigError("unknown scenario kind '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::clean: return "clean";
    case ScenarioKind::rgb_advantage: return "rgb_advantage";
    case ScenarioKind::x_advantage: return "x_advantage";
    case ScenarioKind::modality_missing: return "modality_missing";
  }
  return "clean";
}

namespace {

using Rgb = std::array<double, 3>;

struct Mover {
  double x = 0, y = 0, vx = 0, vy = 0;
  double w = 1, h = 1;
  bool disc = false;
  Rgb color{};
  double heat = 0.0;
};

// Low-frequency texture: a few random plane waves per channel.
struct Texture {
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;
  Rgb base{};

  double at(std::size_t c, double x, double y) const {
    double v = base[c];
    for (const Wave& w : waves[c]) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
    return v;
  }
};

Texture make_texture(std::mt19937_64& rng, Rgb base, double amp) {
  std::uniform_real_distribution<double> freq(0.05, 0.4), phase(0.0, 6.283),
      sign(-1.0, 1.0);
  Texture t;
  t.base = base;
  for (auto& ws : t.waves)
    for (int i = 0; i < 3; ++i)
      ws.push_back({freq(rng) * (sign(rng) < 0 ? -1 : 1), freq(rng), phase(rng),
                    amp / 3.0});
  return t;
}

// Fraction of a pixel covered by the object, 4×4 supersampled.
double coverage(const Mover& m, std::size_t px, std::size_t py) {
  int hits = 0;
  for (int sy = 0; sy < 4; ++sy)
    for (int sx = 0; sx < 4; ++sx) {
      const double x = static_cast<double>(px) + (sx + 0.5) / 4.0;
      const double y = static_cast<double>(py) + (sy + 0.5) / 4.0;
      const double dx = (x - m.x) / (0.5 * m.w), dy = (y - m.y) / (0.5 * m.h);
      hits += m.disc ? (dx * dx + dy * dy <= 1.0)
                     : (std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0);
    }
  return hits / 16.0;
}

void paint(Image& img, const Mover& m, const Rgb& color) {
  const auto lo_x = static_cast<long>(std::floor(m.x - 0.5 * m.w)) - 1;
  const auto hi_x = static_cast<long>(std::ceil(m.x + 0.5 * m.w)) + 1;
  const auto lo_y = static_cast<long>(std::floor(m.y - 0.5 * m.h)) - 1;
  const auto hi_y = static_cast<long>(std::ceil(m.y + 0.5 * m.h)) + 1;
  for (long y = std::max(lo_y, 0L); y < std::min(hi_y, static_cast<long>(img.height)); ++y)
    for (long x = std::max(lo_x, 0L); x < std::min(hi_x, static_cast<long>(img.width)); ++x) {
      const double a = coverage(m, static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      if (a <= 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        double& p = img.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        p = (1 - a) * p + a * color[c];
      }
    }
}

void step(Mover& m, const Scenario& s, std::mt19937_64& rng,
          const Mover* attractor) {
  std::normal_distribution<double> n(0.0, s.accel);
  m.vx = 0.85 * m.vx + n(rng);
  m.vy = 0.85 * m.vy + n(rng);
  if (attractor) {
    m.vx += 0.04 * (attractor->x - m.x);
    m.vy += 0.04 * (attractor->y - m.y);
  }
  const double speed = std::hypot(m.vx, m.vy);
  if (speed > s.max_speed) {
    m.vx *= s.max_speed / speed;
    m.vy *= s.max_speed / speed;
  }
  m.x += m.vx;
  m.y += m.vy;
  const double lx = 0.5 * m.w + 1, hx = static_cast<double>(s.width) - 0.5 * m.w - 1;
  const double ly = 0.5 * m.h + 1, hy = static_cast<double>(s.height) - 0.5 * m.h - 1;
  if (m.x < lx) { m.x = lx; m.vx = std::abs(m.vx); }
  if (m.x > hx) { m.x = hx; m.vx = -std::abs(m.vx); }
  if (m.y < ly) { m.y = ly; m.vy = std::abs(m.vy); }
  if (m.y > hy) { m.y = hy; m.vy = -std::abs(m.vy); }
}

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Saturated hue at high value.
  const double hue = u(rng) * 6.0;
  const int sector = static_cast<int>(hue) % 6;
  const double f = hue - std::floor(hue);
  const double v = 0.95, lo = 0.1;
  const double up = lo + (v - lo) * f, down = v - (v - lo) * f;
  switch (sector) {
    case 0: return {v, up, lo};
    case 1: return {down, v, lo};
    case 2: return {lo, v, up};
    case 3: return {lo, down, v};
    case 4: return {up, lo, v};
    default: return {v, lo, down};
  }
}

double hue_distance(const Rgb& a, const Rgb& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

}  // namespace

Sequence gen_sequence(const Scenario& s, std::uint64_t seed) {
  if (s.length < 2) throw ConfigError("sequence length must be at least 2");
  if (s.width < 4 * s.max_size || s.height < 4 * s.max_size) {
    throw ConfigError("frame too small for the configured target size");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> size(s.min_size, s.max_size);
  const double fw = static_cast<double>(s.width), fh = static_cast<double>(s.height);

  const Rgb bg_color{0.2 + 0.3 * u(rng), 0.2 + 0.3 * u(rng), 0.2 + 0.3 * u(rng)};
  const Texture rgb_tex = make_texture(rng, bg_color, 0.15);
  const Texture x_tex = make_texture(rng, {0.25, 0.25, 0.25}, 0.08);

  Mover target;
  target.w = size(rng);
  target.h = size(rng);
  target.disc = u(rng) < 0.5;
  target.x = fw * (0.3 + 0.4 * u(rng));
  target.y = fh * (0.3 + 0.4 * u(rng));
  target.color = random_color(rng);
  target.heat = 0.9;

  Rgb distractor_color = random_color(rng);
  while (hue_distance(distractor_color, target.color) < 0.9)
    distractor_color = random_color(rng);
  if (s.kind == ScenarioKind::x_advantage) {
    // The RGB target blends in with the distractors.
    target.color = distractor_color;
  }

  std::vector<Mover> distractors(s.distractors);
  for (Mover& d : distractors) {
    d.w = size(rng);
    d.h = size(rng);
    d.disc = u(rng) < 0.5;
    const double ang = u(rng) * 2 * std::numbers::pi;
    const double r = 1.5 * s.max_size + u(rng) * 0.25 * fw;
    d.x = std::clamp(target.x + r * std::cos(ang), 0.5 * d.w + 1, fw - 0.5 * d.w - 1);
    d.y = std::clamp(target.y + r * std::sin(ang), 0.5 * d.h + 1, fh - 0.5 * d.h - 1);
    d.color = distractor_color;
    d.heat = 0.35;
  }

  // Static backgrounds, rendered once.
  Image rgb_bg(s.height, s.width), x_bg(s.height, s.width);
  for (std::size_t y = 0; y < s.height; ++y)
    for (std::size_t x = 0; x < s.width; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const double heat = x_tex.at(0, px, py);
      for (std::size_t c = 0; c < 3; ++c) {
        rgb_bg.at(c, y, x) = rgb_tex.at(c, px, py);
        x_bg.at(c, y, x) = heat;
      }
    }

  Sequence seq;
  seq.kind = s.kind;
  seq.name = to_string(s.kind) + "_" + std::to_string(seed);
  std::normal_distribution<double> noise(0.0, s.noise);
  for (std::size_t t = 0; t < s.length; ++t) {
    if (t > 0) {
      step(target, s, rng, nullptr);
      for (Mover& d : distractors) step(d, s, rng, &target);
    }
    Frame f;
    f.modality = ModalityTag::thermal;
    f.rgb = rgb_bg;
    f.x = x_bg;
    for (const Mover& d : distractors) {
      paint(f.rgb, d, d.color);
      paint(f.x, d, {d.heat, d.heat, d.heat});
    }
    paint(f.rgb, target, target.color);
    if (s.kind != ScenarioKind::rgb_advantage) {
      paint(f.x, target, {target.heat, target.heat, target.heat});
    }
    for (double& v : f.rgb.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
    if (s.kind == ScenarioKind::rgb_advantage) {
      // Flat thermal frame: no object structure at all.
      for (double& v : f.x.pixels) v = 0.3;
    }
    for (std::size_t i = 0; i < f.x.pixels.size() / 3; ++i) {
      const double v = std::clamp(f.x.pixels[i] + noise(rng), 0.0, 1.0);
      f.x.pixels[i] = v;
    }
    const std::size_t plane = s.width * s.height;
    std::copy_n(f.x.pixels.begin(), plane, f.x.pixels.begin() + plane);
    std::copy_n(f.x.pixels.begin(), plane, f.x.pixels.begin() + 2 * plane);
    if (s.kind == ScenarioKind::modality_missing) f.x = f.rgb;
    f.gt = BBox{target.x, target.y, target.w, target.h};
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::vector<Sequence> gen_dataset(const Scenario& base,
                                  const std::vector<ScenarioKind>& kinds,
                                  std::size_t count, std::uint64_t seed) {
  if (kinds.empty()) throw ConfigError("no scenario kinds given");
  std::vector<Sequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Scenario s = base;
    s.kind = kinds[i % kinds.size()];
    out.push_back(gen_sequence(s, seed + i));
  }
  return out;
}

}  // namespace cstrack
