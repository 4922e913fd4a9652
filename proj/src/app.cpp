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

#include "cstrack/app.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "cstrack/error.hpp"
#include "cstrack/gradcheck_suite.hpp"
#include "cstrack/io.hpp"

namespace cstrack {

using nlohmann::json;
namespace fs = std::filesystem;

void RunConfig::validate() const {
  model.validate();
  train.validate();
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
  };
  const Scenario& s = data.scenario;
  if (s.length < train.stage2_frames + 1) {
    fail("data.length", "must exceed train.stage2_frames");
  }
  if (s.min_size <= 0.0 || s.max_size < s.min_size) {
    fail("data.min_size", "need 0 < min_size <= max_size");
  }
  if (s.width < 4 * s.max_size || s.height < 4 * s.max_size) {
    fail("data.width", "frames must be at least 4x the largest target");
  }
  if (data.train_sequences == 0) fail("data.train_sequences", "must be positive");
  if (data.eval_sequences == 0 && data.manifests.empty()) {
    fail("data.eval_sequences", "must be positive");
  }
  if (data.train_kinds.empty()) fail("data.train_kinds", "must not be empty");
  if (data.eval_kinds.empty()) fail("data.eval_kinds", "must not be empty");
  if (!(eval.tau > 0.0)) fail("eval.tau", "must be positive");
  if (out_dir.empty()) fail("out_dir", "must not be empty");
}

RunConfig full_profile() {
  RunConfig c;
  c.profile = "full";
  c.model.dim = 512;
  c.model.heads = 8;
  c.model.layers = 12;
  c.model.n_q = 4;
  c.model.n_m = 16;
  c.model.memory_length = 4;
  c.model.patch = 16;
  c.model.template_size = 128;
  c.model.search_size = 256;
  c.model.head_channels = 256;
  c.train.optimizer = "adamw";
  c.data.scenario.width = 512;
  c.data.scenario.height = 512;
  c.data.scenario.min_size = 40;
  c.data.scenario.max_size = 96;
  return c;
}

RunConfig profile_by_name(const std::string& name) {
  if (name == "toy") return RunConfig{};
  if (name == "full") return full_profile();
  throw ConfigError("profile: unknown profile '" + name + "' (toy, full)");
}

namespace {

json kinds_json(const std::vector<ScenarioKind>& kinds) {
  json a = json::array();
  for (ScenarioKind k : kinds) a.push_back(to_string(k));
  return a;
}

}  // namespace

json to_json(const RunConfig& c) {
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  const Scenario& s = c.data.scenario;
  json j;
  j["profile"] = c.profile;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["checkpoint"] = c.checkpoint;
  j["model"] = {
      {"framework", to_string(m.framework)},
      {"dim", m.dim},
      {"layers", m.layers},
      {"heads", m.heads},
      {"ffn_mult", m.ffn_mult},
      {"n_q", m.n_q},
      {"n_m", m.n_m},
      {"memory_length", m.memory_length},
      {"patch", m.patch},
      {"template_size", m.template_size},
      {"search_size", m.search_size},
      {"head_channels", m.head_channels},
      {"shared_embedding", m.shared_embedding},
      {"scm_variant", to_string(m.scm_variant)},
      {"tcm_mode", to_string(m.tcm_mode)},
      {"use_tcm", m.use_tcm},
      {"search_factor", m.search_factor},
      {"template_factor", m.template_factor},
      {"update_threshold", m.update_threshold ? json(*m.update_threshold) : json(nullptr)},
  };
  j["train"] = {
      {"optimizer", t.optimizer},
      {"momentum", t.momentum},
      {"beta2", t.beta2},
      {"weight_decay", t.weight_decay},
      {"lr_stage1", t.lr_stage1},
      {"lr_stage2", t.lr_stage2},
      {"stage1_steps", t.stage1_steps},
      {"stage2_steps", t.stage2_steps},
      {"batch_size", t.batch_size},
      {"stage2_frames", t.stage2_frames},
      {"clip_norm", t.clip_norm},
      {"shift_jitter", t.shift_jitter},
      {"scale_jitter", t.scale_jitter},
      {"template_gap", t.template_gap},
      {"lambda_iou", t.weights.iou},
      {"lambda_l1", t.weights.l1},
  };
  j["data"] = {
      {"length", s.length},
      {"width", s.width},
      {"height", s.height},
      {"min_size", s.min_size},
      {"max_size", s.max_size},
      {"max_speed", s.max_speed},
      {"accel", s.accel},
      {"distractors", s.distractors},
      {"noise", s.noise},
      {"train_sequences", c.data.train_sequences},
      {"train_seed", c.data.train_seed},
      {"train_kinds", kinds_json(c.data.train_kinds)},
      {"eval_sequences", c.data.eval_sequences},
      {"eval_seed", c.data.eval_seed},
      {"eval_kinds", kinds_json(c.data.eval_kinds)},
      {"manifests", c.data.manifests},
  };
  j["eval"] = {
      {"tau", c.eval.tau},
      {"compare_rgb_only", c.eval.compare_rgb_only},
      {"heatmap_frames", c.eval.heatmap_frames},
      {"heatmap_sequences", c.eval.heatmap_sequences},
  };
  return j;
}

namespace {

// Overlays `patch` onto `target`, refusing keys the target does not have.
void merge_known(json& target, const json& patch, const std::string& path) {
  if (!patch.is_object()) {
    throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError(key + ": unknown key");
    json& slot = target[it.key()];
    if (slot.is_object()) {
      merge_known(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* j = &root_;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      j = &j->at(path.substr(start, dot - start));
      if (dot == std::string::npos) return *j;
      start = dot + 1;
    }
  }

  std::size_t count(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
    return v.get<std::size_t>();
  }
  double real(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }
  bool flag(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }
  template <class F>
  auto parsed(const std::string& path, F parse) const {
    try {
      return parse(text(path));
    } catch (const ConfigError& e) {
      fail(path, e.what());
    }
  }
  std::vector<ScenarioKind> kinds(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_array()) fail(path, "expected a list of scenario kinds");
    std::vector<ScenarioKind> out;
    for (const json& k : v) {
      if (!k.is_string()) fail(path, "expected a list of scenario kinds");
      try {
        out.push_back(parse_scenario(k.get<std::string>()));
      } catch (const ConfigError& e) {
        fail(path, e.what());
      }
    }
    return out;
  }
  std::vector<std::size_t> counts(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_array()) fail(path, "expected a list of integers");
    std::vector<std::size_t> out;
    for (const json& k : v) {
      if (!k.is_number_unsigned()) fail(path, "expected a list of integers");
      out.push_back(k.get<std::size_t>());
    }
    return out;
  }
  std::vector<std::string> texts(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_array()) fail(path, "expected a list of strings");
    std::vector<std::string> out;
    for (const json& k : v) {
      if (!k.is_string()) fail(path, "expected a list of strings");
      out.push_back(k.get<std::string>());
    }
    return out;
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& why) {
    throw ConfigError(path + ": " + why);
  }

 private:
  const json& root_;
};

}  // namespace

RunConfig config_from_json(const json& patch, RunConfig base) {
  json merged = to_json(base);
  merge_known(merged, patch, "");
  const Reader r(merged);
  RunConfig c;
  c.profile = r.text("profile");
  c.seed = r.count("seed");
  c.out_dir = r.text("out_dir");
  c.checkpoint = r.text("checkpoint");

  ModelConfig& m = c.model;
  m.framework = r.parsed("model.framework", parse_framework);
  m.dim = r.count("model.dim");
  m.layers = r.count("model.layers");
  m.heads = r.count("model.heads");
  m.ffn_mult = r.count("model.ffn_mult");
  m.n_q = r.count("model.n_q");
  m.n_m = r.count("model.n_m");
  m.memory_length = r.count("model.memory_length");
  m.patch = r.count("model.patch");
  m.template_size = r.count("model.template_size");
  m.search_size = r.count("model.search_size");
  m.head_channels = r.count("model.head_channels");
  m.shared_embedding = r.flag("model.shared_embedding");
  m.scm_variant = r.parsed("model.scm_variant", parse_scm_variant);
  m.tcm_mode = r.parsed("model.tcm_mode", parse_tcm_mode);
  m.use_tcm = r.flag("model.use_tcm");
  m.search_factor = r.real("model.search_factor");
  m.template_factor = r.real("model.template_factor");
  if (r.at("model.update_threshold").is_null()) {
    m.update_threshold.reset();
  } else {
    m.update_threshold = r.real("model.update_threshold");
  }

  TrainConfig& t = c.train;
  t.optimizer = r.text("train.optimizer");
  t.momentum = r.real("train.momentum");
  t.beta2 = r.real("train.beta2");
  t.weight_decay = r.real("train.weight_decay");
  t.lr_stage1 = r.real("train.lr_stage1");
  t.lr_stage2 = r.real("train.lr_stage2");
  t.stage1_steps = r.count("train.stage1_steps");
  t.stage2_steps = r.count("train.stage2_steps");
  t.batch_size = r.count("train.batch_size");
  t.stage2_frames = r.count("train.stage2_frames");
  t.clip_norm = r.real("train.clip_norm");
  t.shift_jitter = r.real("train.shift_jitter");
  t.scale_jitter = r.real("train.scale_jitter");
  t.template_gap = r.count("train.template_gap");
  t.weights.iou = r.real("train.lambda_iou");
  t.weights.l1 = r.real("train.lambda_l1");

  Scenario& s = c.data.scenario;
  s.length = r.count("data.length");
  s.width = r.count("data.width");
  s.height = r.count("data.height");
  s.min_size = r.real("data.min_size");
  s.max_size = r.real("data.max_size");
  s.max_speed = r.real("data.max_speed");
  s.accel = r.real("data.accel");
  s.distractors = r.count("data.distractors");
  s.noise = r.real("data.noise");
  c.data.train_sequences = r.count("data.train_sequences");
  c.data.train_seed = r.count("data.train_seed");
  c.data.train_kinds = r.kinds("data.train_kinds");
  c.data.eval_sequences = r.count("data.eval_sequences");
  c.data.eval_seed = r.count("data.eval_seed");
  c.data.eval_kinds = r.kinds("data.eval_kinds");
  c.data.manifests = r.texts("data.manifests");

  c.eval.tau = r.real("eval.tau");
  c.eval.compare_rgb_only = r.flag("eval.compare_rgb_only");
  c.eval.heatmap_frames = r.counts("eval.heatmap_frames");
  c.eval.heatmap_sequences = r.count("eval.heatmap_sequences");
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* slot = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("--set: malformed key '" + key + "'");
    if (!slot->is_object()) *slot = json::object();
    slot = &(*slot)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *slot = std::move(value);
}

const std::vector<AblationRow>& ablation_rows() {
  static const std::vector<AblationRow> rows = [] {
    std::vector<AblationRow> r;
    auto framework = [](FrameworkKind k) {
      return [k](RunConfig& c) { c.model.framework = k; };
    };
    r.push_back({"framework-dual-asymmetric",
                 "two branches, X features as auxiliary prompts",
                 framework(FrameworkKind::dual_asymmetric)});
    r.push_back({"framework-dual-symmetric",
                 "two identical branches with interaction MLPs",
                 framework(FrameworkKind::dual_symmetric)});
    r.push_back({"framework-compact", "one compact branch (default model)",
                 framework(FrameworkKind::compact)});
    auto spatial_only = [](RunConfig& c) { c.model.use_tcm = false; };
    r.push_back({"scm-baseline", "full spatial compact module, no temporal module",
                 spatial_only});
    r.push_back({"scm-no-queries", "no modality-specific queries (N_q = 0)",
                 [=](RunConfig& c) {
                   spatial_only(c);
                   c.model.n_q = 0;
                   c.model.scm_variant = ScmVariant::no_queries;
                 }});
    r.push_back({"scm-no-cross-attention", "each modality attends only to itself",
                 [=](RunConfig& c) {
                   spatial_only(c);
                   c.model.scm_variant = ScmVariant::no_cross_attention;
                 }});
    r.push_back({"scm-unshared-embedding", "separate patch embeddings per modality",
                 [=](RunConfig& c) {
                   spatial_only(c);
                   c.model.shared_embedding = false;
                 }});
    r.push_back({"tcm-baseline", "spatial modelling only", spatial_only});
    auto tcm = [](TcmMode mode) {
      return [mode](RunConfig& c) {
        c.model.use_tcm = true;
        c.model.tcm_mode = mode;
      };
    };
    r.push_back({"tcm-roi", "memory from RoI tokens around the predicted box",
                 tcm(TcmMode::roi)});
    r.push_back({"tcm-query", "memory from learnable temporal queries",
                 tcm(TcmMode::query)});
    r.push_back({"tcm-h-i", "memory selected by the correlation heatmap only",
                 tcm(TcmMode::h_i_only)});
    r.push_back({"tcm-h-f", "memory selected by the box heatmap only",
                 tcm(TcmMode::h_f_only)});
    r.push_back({"tcm-combined", "memory selected by the combined heatmap (default model)",
                 tcm(TcmMode::combined)});
    return r;
  }();
  return rows;
}

const AblationRow& find_ablation_row(const std::string& name) {
  for (const AblationRow& r : ablation_rows())
    if (r.name == name) return r;
  throw ConfigError("ablate: unknown row '" + name + "' (see 'ablate --list')");
}

std::vector<Sequence> training_sequences(const DataConfig& d) {
  return gen_dataset(d.scenario, d.train_kinds, d.train_sequences, d.train_seed);
}

std::vector<Sequence> evaluation_sequences(const DataConfig& d) {
  return gen_dataset(d.scenario, d.eval_kinds, d.eval_sequences, d.eval_seed);
}

Evaluation evaluate(const Model& model, const std::vector<Sequence>& data,
                    const EvalConfig& eval, bool rgb_only_input, bool keep_heatmaps) {
  Evaluation e;
  std::map<std::string, std::vector<TrackResult>> grouped;
  for (const Sequence& s : data) {
    e.results.push_back(run_tracker(model, s, {rgb_only_input, keep_heatmaps}));
    grouped[to_string(s.kind)].push_back(e.results.back());
  }
  e.overall = compute_metrics(e.results, eval.tau);
  for (const auto& [kind, results] : grouped)
    e.by_kind[kind] = compute_metrics(results, eval.tau);
  return e;
}

json metrics_json(const Metrics& m) {
  return {{"precision", m.precision},
          {"success_auc", m.success_auc},
          {"mean_iou", m.mean_iou},
          {"frames", m.frames}};
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

json evaluation_json(const Evaluation& e, bool with_kinds) {
  json j = {{"overall", metrics_json(e.overall)}};
  if (with_kinds) {
    json k = json::object();
    for (const auto& [kind, m] : e.by_kind) k[kind] = metrics_json(m);
    j["by_kind"] = k;
  }
  return j;
}

void write_frames(const fs::path& path, const Evaluation& e) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const TrackResult& r : e.results)
    for (const FrameRecord& f : r.frames) {
      const json row = {{"sequence", r.sequence},
                        {"frame", f.frame},
                        {"box", {f.box.x_c, f.box.y_c, f.box.w, f.box.h}},
                        {"confidence", f.confidence},
                        {"iou", f.iou},
                        {"center_error", f.center_error},
                        {"template_updated", f.template_updated},
                        {"roi_fallback", f.roi_fallback}};
      out << row.dump() << '\n';
    }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_heatmaps(const fs::path& dir, const Evaluation& e, const EvalConfig& eval) {
  const std::size_t n = std::min(eval.heatmap_sequences, e.results.size());
  if (n == 0 || eval.heatmap_frames.empty()) return;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < n; ++i) {
    const TrackResult& r = e.results[i];
    for (std::size_t f : eval.heatmap_frames) {
      if (f >= r.heatmaps.size()) continue;
      write_heatmap_pgm(dir / (r.sequence + "_frame" + std::to_string(f) + ".pgm"),
                        r.heatmaps[f]);
    }
  }
}

struct Context {
  RunConfig config;
  fs::path out;
  std::ostream& log;
};

// Tracks `data`, then writes metrics.json, frames.jsonl and heatmaps.
void evaluate_and_emit(const Context& ctx, const Model& model,
                       const std::vector<Sequence>& data, bool with_kinds,
                       json summary) {
  const EvalConfig& ev = ctx.config.eval;
  const Evaluation full = evaluate(model, data, ev, false, true);
  write_frames(ctx.out / "frames.jsonl", full);
  write_heatmaps(ctx.out / "heatmaps", full, ev);
  summary["sequences"] = data.size();
  summary["parameters"] = model.parameter_count();
  summary["full_input"] = evaluation_json(full, with_kinds);
  ctx.log << "mean IoU " << full.overall.mean_iou << ", success AUC "
          << full.overall.success_auc << ", precision " << full.overall.precision
          << " over " << full.overall.frames << " frames\n";
  if (ev.compare_rgb_only) {
    const Evaluation rgb = evaluate(model, data, ev, true, false);
    summary["rgb_only_input"] = evaluation_json(rgb, with_kinds);
    ctx.log << "RGB-only input: mean IoU " << rgb.overall.mean_iou << '\n';
  }
  write_text(ctx.out / "metrics.json", summary.dump(2) + "\n");
}

void train_and_evaluate(const Context& ctx, json summary) {
  const RunConfig& c = ctx.config;
  const std::vector<Sequence> data = training_sequences(c.data);
  Model model = Model::build(c.model, c.seed);
  std::ofstream curve(ctx.out / "loss.csv");
  if (!curve) throw IoError("cannot write '" + (ctx.out / "loss.csv").string() + "'");
  curve << "stage,step,loss,cls,iou,l1\n" << std::setprecision(17);
  const std::size_t every = std::max<std::size_t>(1, c.train.stage1_steps / 10);
  auto observer = [&](const LossRecord& r) {
    curve << r.stage << ',' << r.step << ',' << r.loss << ',' << r.cls << ',' << r.iou
          << ',' << r.l1 << '\n';
    if (r.step % every == 0) {
      ctx.log << "stage " << r.stage << " step " << r.step << " loss " << r.loss << '\n';
    }
  };
  train_two_stage(model, data, c.train, c.seed, observer);
  curve.close();
  if (!curve) throw IoError("failed writing loss.csv");
  save_parameters(ctx.out / "params.bin", model.params());
  evaluate_and_emit(ctx, model, evaluation_sequences(c.data), true, std::move(summary));
}

int cmd_gradcheck(const Context& ctx) {
  const std::vector<SuiteResult> rows = run_gradcheck_suites();
  constexpr double kTolerance = 1e-4;
  json j = json::object();
  bool ok = true;
  for (const SuiteResult& r : rows) {
    ctx.log << std::left << std::setw(16) << r.module << std::scientific
            << std::setprecision(3) << r.max_rel_err << std::defaultfloat
            << (r.max_rel_err < kTolerance ? "  ok" : "  FAIL") << '\n';
    j[r.module] = r.max_rel_err;
    ok = ok && r.max_rel_err < kTolerance;
  }
  write_text(ctx.out / "gradcheck.json", j.dump(2) + "\n");
  return ok ? 0 : 2;
}

int cmd_generate(const Context& ctx, const std::string& split) {
  const DataConfig& d = ctx.config.data;
  const std::vector<Sequence> seqs =
      split == "train" ? training_sequences(d) : evaluation_sequences(d);
  for (const Sequence& s : seqs) write_sequence(ctx.out / "sequences" / s.name, s);
  ctx.log << "wrote " << seqs.size() << " sequences to " << (ctx.out / "sequences").string()
          << '\n';
  return 0;
}

int cmd_track(const Context& ctx) {
  const RunConfig& c = ctx.config;
  Model model = Model::build(c.model, c.seed);
  if (c.checkpoint.empty()) {
    ctx.log << "note: no checkpoint given; tracking with initial weights\n";
  } else {
    load_parameters(fs::path(c.checkpoint), model.params());
  }
  std::vector<Sequence> data;
  const bool from_manifests = !c.data.manifests.empty();
  if (from_manifests) {
    for (const std::string& m : c.data.manifests) data.push_back(load_manifest(m));
  } else {
    data = evaluation_sequences(c.data);
  }
  evaluate_and_emit(ctx, model, data, !from_manifests, {{"command", "track"}});
  return 0;
}

int cmd_compare(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const FrameworkKind kinds[] = {FrameworkKind::compact, FrameworkKind::dual_asymmetric,
                                 FrameworkKind::dual_symmetric};
  std::ostringstream census, lengths;
  census << "framework,group,params\n";
  lengths << "framework,n_q,branch,tokens\n";
  json frameworks = json::array();
  std::vector<std::pair<std::size_t, std::string>> totals;
  std::mt19937_64 g(c.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto noise = [&](std::size_t side) {
    Image img(side, side);
    for (double& v : img.pixels) v = u(g);
    return img;
  };
  const ModalityCrops crops{noise(c.model.template_size), noise(c.model.template_size),
                            noise(c.model.search_size)};
  for (FrameworkKind k : kinds) {
    ModelConfig mc = c.model;
    mc.framework = k;
    const Model m = Model::build(mc, c.seed);
    for (const auto& [group, n] : m.census())
      census << to_string(k) << ',' << group << ',' << n << '\n';
    json lens = json::object();
    for (std::size_t nq : {std::size_t{0}, std::size_t{2}, std::size_t{4}}) {
      ModelConfig lc = mc;
      lc.n_q = nq;
      if (nq == 0 && lc.scm_variant == ScmVariant::full) lc.scm_variant = ScmVariant::no_queries;
      const Model lm = Model::build(lc, c.seed);
      const NoGradScope ng(lm.params());
      const SpatialOutput sp = lm.spatial(crops, crops, ModalityTag::thermal);
      std::size_t total = 0;
      for (std::size_t b = 0; b < sp.branch_lengths.size(); ++b) {
        lengths << to_string(k) << ',' << nq << ',' << b << ',' << sp.branch_lengths[b] << '\n';
        total += sp.branch_lengths[b];
      }
      lens[std::to_string(nq)] = total;
    }
    frameworks.push_back({{"framework", to_string(k)},
                          {"parameters", m.parameter_count()},
                          {"backbone_input_tokens", lens}});
    totals.emplace_back(m.parameter_count(), to_string(k));
  }
  write_text(ctx.out / "census.csv", census.str());
  write_text(ctx.out / "lengths.csv", lengths.str());
  const bool ordered = totals[0].first < totals[1].first && totals[1].first < totals[2].first;
  std::sort(totals.begin(), totals.end());
  ctx.log << "parameters (ascending):\n";
  for (const auto& [n, name] : totals) ctx.log << "  " << std::left << std::setw(18) << name << n << '\n';
  ctx.log << "compact < dual_asymmetric < dual_symmetric: " << (ordered ? "holds" : "violated")
          << '\n';
  const json summary = {{"command", "compare-frameworks"},
                        {"frameworks", frameworks},
                        {"ordering_holds", ordered}};
  write_text(ctx.out / "metrics.json", summary.dump(2) + "\n");
  return 0;
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compact spatiotemporal RGB-X tracker: training, tracking and ablations",
               "cstrack"};
  app.require_subcommand(1);
  std::string config_path, out_opt, profile = "toy";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", sets, "Override a config field: key=value (repeatable)");
  app.add_option("--out", out_opt, "Output directory (overrides CSTRACK_OUT_DIR)");
  app.add_option("--profile", profile, "Base profile: toy or full");
  app.add_option("--seed", seed, "Shortcut for --set seed=N");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks per module");
  std::string split = "eval";
  auto* generate_cmd = app.add_subcommand("generate", "Write synthetic sequences as PPM + manifest");
  generate_cmd->add_option("--split", split, "eval or train")
      ->check(CLI::IsMember({"eval", "train"}));
  auto* track = app.add_subcommand("track", "Track sequences and score them");
  std::string checkpoint;
  track->add_option("--checkpoint", checkpoint, "Parameter file to load");
  auto* train = app.add_subcommand("train", "Two-stage training, then evaluation");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate one named ablation row");
  std::string row;
  bool list = false;
  ablate->add_option("row", row, "Row name");
  ablate->add_flag("--list", list, "List the rows");
  auto* compare = app.add_subcommand("compare-frameworks",
                                     "Parameter census and backbone input lengths");
  for (CLI::App* sub : {gradcheck, generate_cmd, track, train, ablate, compare}) sub->fallthrough();

  std::vector<const char*> argv{"cstrack"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (ablate->parsed() && list) {
      for (const AblationRow& r : ablation_rows())
        out << std::left << std::setw(26) << r.name << r.description << '\n';
      return 0;
    }
    if (ablate->parsed() && row.empty()) {
      err << "error: ablate needs a row name (see 'ablate --list')\n";
      return 1;
    }

    RunConfig base = profile_by_name(profile);
    if (ablate->parsed()) find_ablation_row(row).apply(base);
    json patch = config_path.empty() ? json::object() : read_config_file(config_path);
    for (const std::string& s : sets) apply_override(patch, s);
    if (seed) patch["seed"] = *seed;
    if (!checkpoint.empty()) patch["checkpoint"] = checkpoint;
    RunConfig config = config_from_json(patch, base);
    if (!out_opt.empty()) {
      config.out_dir = out_opt;
    } else if (const char* env = std::getenv("CSTRACK_OUT_DIR"); env && *env) {
      config.out_dir = env;
    }
    config.validate();

    const fs::path dir(config.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
      throw IoError("cannot create output directory '" + dir.string() + "'");
    }
    write_text(dir / "config.json", to_json(config).dump(2) + "\n");
    const Context ctx{config, dir, out};

    if (gradcheck->parsed()) return cmd_gradcheck(ctx);
    if (generate_cmd->parsed()) return cmd_generate(ctx, split);
    if (track->parsed()) return cmd_track(ctx);
    if (compare->parsed()) return cmd_compare(ctx);
    if (train->parsed()) {
      train_and_evaluate(ctx, {{"command", "train"}});
      return 0;
    }
    train_and_evaluate(ctx, {{"command", "ablate"}, {"row", row}});
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace cstrack
