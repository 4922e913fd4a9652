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

#include <filesystem>
#include <iosfwd>

#include "cstrack/layers.hpp"
#include "cstrack/synthetic.hpp"

namespace cstrack {

// Parameter files: a text header
//   CSTRACK-PARAMS 1
//   tensors <N>
//   <name> <rank> <dim>... (one line per tensor, store order)
//   data
// followed by every tensor's values as little-endian IEEE-754 float64.

void save_parameters(std::ostream& out, const ParamStore& store);
void save_parameters(const std::filesystem::path& path, const ParamStore& store);

/// Loads into an existing store; names, order and shapes must match.
void load_parameters(std::istream& in, ParamStore& store);
void load_parameters(const std::filesystem::path& path, ParamStore& store);

/// Reads a manifest of lines "rgb_path x_path [x_c y_c w h]"; paths are
/// relative to the manifest's directory. '#' starts a comment, and a
/// "# modality: <tag>" line sets the modality (default thermal).
Sequence load_manifest(const std::filesystem::path& path);

/// Writes a sequence as PPM frames plus a manifest in `dir`.
void write_sequence(const std::filesystem::path& dir, const Sequence& seq);

}  // namespace cstrack
