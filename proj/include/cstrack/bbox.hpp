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

namespace cstrack {

/// Axis-aligned box in pixel coordinates, centre form.
struct BBox {
  double x_c = 0.0;
  double y_c = 0.0;
  double w = 1.0;
  double h = 1.0;

  double left() const { return x_c - 0.5 * w; }
  double right() const { return x_c + 0.5 * w; }
  double top() const { return y_c - 0.5 * h; }
  double bottom() const { return y_c + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

double iou(const BBox& a, const BBox& b);
/// IoU − |C \ (A ∪ B)| / |C| with C the smallest enclosing box. In (−1, 1].
double giou(const BBox& a, const BBox& b);
double center_distance(const BBox& a, const BBox& b);

/// Clamps the centre into [0, width] × [0, height] and sizes to at least
/// `min_size`.
BBox clamp_box(const BBox& b, double width, double height,
               double min_size = 1.0);

}  // namespace cstrack
