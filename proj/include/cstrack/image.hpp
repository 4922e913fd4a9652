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
#include <filesystem>
#include <vector>

#include "cstrack/bbox.hpp"
#include "cstrack/tensor.hpp"

namespace cstrack {

/// Three-channel planar image, values nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // [3 × height × width], channel-major

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(3 * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Square window extracted from a frame and resampled to a fixed size.
struct CropWindow {
  double x0 = 0.0;  // frame coordinates of the window's top-left corner
  double y0 = 0.0;
  double side = 1.0;  // window side in frame pixels
  std::size_t out_size = 1;

  double scale() const { return side / static_cast<double>(out_size); }
  /// Box in window pixels → box in frame pixels.
  BBox to_frame(const BBox& b) const;
  /// Box in frame pixels → box in window pixels.
  BBox to_window(const BBox& b) const;
};

CropWindow centered_window(double x_c, double y_c, double side,
                           std::size_t out_size);

/// Bilinear resampling of `window` out of `img`; pixels outside the frame
/// read as zero.
Image crop_resample(const Image& img, const CropWindow& window);

// Portable anymap I/O. P5 (graymap) loads as three identical channels; P6
// (pixmap) loads as RGB. Only 8-bit maxval is supported.
Image read_pnm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);
/// Writes a single-channel [rows × cols] map, min-max scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const Tensor& map,
               std::size_t rows, std::size_t cols);

}  // namespace cstrack
