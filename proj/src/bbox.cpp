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

#include "cstrack/bbox.hpp"

#include <algorithm>
#include <cmath>

namespace cstrack {
namespace {

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const double inter = overlap(a.left(), a.right(), b.left(), b.right()) *
                       overlap(a.top(), a.bottom(), b.top(), b.bottom());
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BBox& a, const BBox& b) {
  const double inter = overlap(a.left(), a.right(), b.left(), b.right()) *
                       overlap(a.top(), a.bottom(), b.top(), b.bottom());
  const double uni = a.area() + b.area() - inter;
  const double cw = std::max(a.right(), b.right()) - std::min(a.left(), b.left());
  const double ch =
      std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
  const double c = cw * ch;
  return inter / uni - (c - uni) / c;
}

double center_distance(const BBox& a, const BBox& b) {
  return std::hypot(a.x_c - b.x_c, a.y_c - b.y_c);
}

BBox clamp_box(const BBox& b, double width, double height, double min_size) {
  BBox out = b;
  out.x_c = std::clamp(out.x_c, 0.0, width);
  out.y_c = std::clamp(out.y_c, 0.0, height);
  out.w = std::clamp(out.w, min_size, std::max(min_size, width));
  out.h = std::clamp(out.h, min_size, std::max(min_size, height));
  return out;
}

}  // namespace cstrack
