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
#include <string>
#include <vector>

#include "cstrack/tokenizer.hpp"

namespace cstrack {

/// clean: both modalities informative. rgb_advantage: X carries no target.
/// x_advantage: RGB target takes the distractors' colour and contrast.
/// modality_missing: X is a copy of RGB.
enum class ScenarioKind { clean, rgb_advantage, x_advantage, modality_missing };

ScenarioKind parse_scenario(const std::string& name);
std::string to_string(ScenarioKind kind);

struct Scenario {
  ScenarioKind kind = ScenarioKind::clean;
  std::size_t length = 40;
  std::size_t width = 64;
  std::size_t height = 64;
  double min_size = 10.0;
  double max_size = 16.0;
  double max_speed = 2.0;   // px per frame
  double accel = 0.5;       // random-walk acceleration scale
  std::size_t distractors = 2;
  double noise = 0.04;      // per-pixel noise amplitude
};

struct Sequence {
  std::string name;
  ScenarioKind kind = ScenarioKind::clean;
  std::vector<Frame> frames;
};

/// Deterministic per seed. Every frame carries its ground-truth box.
Sequence gen_sequence(const Scenario& scenario, std::uint64_t seed);

/// Rotates through `kinds`, giving sequence i the seed `seed + i`.
std::vector<Sequence> gen_dataset(const Scenario& base,
                                  const std::vector<ScenarioKind>& kinds,
                                  std::size_t count, std::uint64_t seed);

}  // namespace cstrack
