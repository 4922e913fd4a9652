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
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cstrack/model.hpp"
#include "cstrack/synthetic.hpp"
#include "cstrack/tracker.hpp"
#include "cstrack/training.hpp"

namespace cstrack {

struct DataConfig {
  Scenario scenario;  // kind is ignored; the kind lists below apply
  std::size_t train_sequences = 200;
  std::uint64_t train_seed = 1000;
  std::vector<ScenarioKind> train_kinds{ScenarioKind::clean, ScenarioKind::rgb_advantage,
                                        ScenarioKind::x_advantage,
                                        ScenarioKind::modality_missing};
  std::size_t eval_sequences = 50;
  std::uint64_t eval_seed = 700000;
  std::vector<ScenarioKind> eval_kinds = train_kinds;
  /// When non-empty, `track` reads these manifests instead of generating.
  std::vector<std::string> manifests;
};

struct EvalConfig {
  double tau = 20.0;
  /// Also score every sequence with the RGB image cloned onto the X input.
  bool compare_rgb_only = true;
  std::vector<std::size_t> heatmap_frames{1, 10, 20};
  std::size_t heatmap_sequences = 2;
};

struct RunConfig {
  std::string profile = "toy";
  std::uint64_t seed = 7;
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  std::string checkpoint;  // parameter file loaded by `track`
  std::string out_dir = "cstrack_out";

  void validate() const;
};

/// Full-scale reference values (D=512, N_q=4, N_m=16, L=4, 128/256 crops).
/// Recorded for documentation; far too large to train here.
RunConfig full_profile();
RunConfig profile_by_name(const std::string& name);

nlohmann::json to_json(const RunConfig& c);
/// Applies `j` on top of `base`. Unknown keys and mistyped values throw
/// ConfigError naming the field.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
/// Applies "a.b.c=value"; the value is parsed as JSON, falling back to a
/// plain string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// One named configuration from the framework, spatial and temporal
/// ablation tables.
struct AblationRow {
  std::string name;
  std::string description;
  std::function<void(RunConfig&)> apply;
};
const std::vector<AblationRow>& ablation_rows();
const AblationRow& find_ablation_row(const std::string& name);

std::vector<Sequence> training_sequences(const DataConfig& d);
std::vector<Sequence> evaluation_sequences(const DataConfig& d);

struct Evaluation {
  Metrics overall;
  std::map<std::string, Metrics> by_kind;
  std::vector<TrackResult> results;
};

Evaluation evaluate(const Model& model, const std::vector<Sequence>& data,
                    const EvalConfig& eval, bool rgb_only_input,
                    bool keep_heatmaps = false);

nlohmann::json metrics_json(const Metrics& m);

/// Entry point of the command-line tool. Exit codes: 0 success, 1 usage or
/// configuration error, 2 numeric failure, 3 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace cstrack
