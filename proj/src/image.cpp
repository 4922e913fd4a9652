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

#include "cstrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "cstrack/error.hpp"

namespace cstrack {

BBox CropWindow::to_frame(const BBox& b) const {
  const double s = scale();
  return {x0 + b.x_c * s, y0 + b.y_c * s, b.w * s, b.h * s};
}

BBox CropWindow::to_window(const BBox& b) const {
  const double s = scale();
  return {(b.x_c - x0) / s, (b.y_c - y0) / s, b.w / s, b.h / s};
}

CropWindow centered_window(double x_c, double y_c, double side,
                           std::size_t out_size) {
  return {x_c - 0.5 * side, y_c - 0.5 * side, side, out_size};
}

Image crop_resample(const Image& img, const CropWindow& window) {
  const std::size_t n = window.out_size;
  Image out(n, n);
  const double s = window.scale();
  const auto h = static_cast<long>(img.height);
  const auto w = static_cast<long>(img.width);
  for (std::size_t oy = 0; oy < n; ++oy) {
    // Sample at output pixel centres; frame pixel centres sit at +0.5.
    const double fy = window.y0 + (static_cast<double>(oy) + 0.5) * s - 0.5;
    const long y0 = static_cast<long>(std::floor(fy));
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < n; ++ox) {
      const double fx = window.x0 + (static_cast<double>(ox) + 0.5) * s - 0.5;
      const long x0 = static_cast<long>(std::floor(fx));
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        auto px = [&](long y, long x) {
          if (y < 0 || x < 0 || y >= h || x >= w) return 0.0;
          return img.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        };
        const double top = (1 - tx) * px(y0, x0) + tx * px(y0, x0 + 1);
        const double bot = (1 - tx) * px(y0 + 1, x0) + tx * px(y0 + 1, x0 + 1);
        out.at(c, oy, ox) = (1 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P6") {
    throw IoError("'" + path.string() + "': unsupported format " + magic);
  }
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw IoError("'" + path.string() + "': malformed header");
  }
  if (maxval == 0 || maxval > 255 || w == 0 || h == 0) {
    throw IoError("'" + path.string() + "': unsupported dimensions/maxval");
  }
  const std::size_t channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(w * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw IoError("'" + path.string() + "': truncated pixel data");
  }
  Image img(h, w);
  const double inv = 1.0 / static_cast<double>(maxval);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src = (y * w + x) * channels + (channels == 3 ? c : 0);
        img.at(c, y, x) = raw[src] * inv;
      }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        raw[(y * img.width + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_pgm(const std::filesystem::path& path, const Tensor& map,
               std::size_t rows, std::size_t cols) {
  if (map.size() != rows * cols) {
    throw DimensionError("write_pgm: map does not fill the grid");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const auto [lo_it, hi_it] =
      std::minmax_element(map.values().begin(), map.values().end());
  const double lo = map.empty() ? 0.0 : *lo_it;
  const double range = map.empty() ? 0.0 : *hi_it - lo;
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  std::vector<unsigned char> raw(rows * cols);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = range > 0.0 ? (map[i] - lo) / range : 0.0;
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace cstrack
