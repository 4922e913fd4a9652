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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cstrack/error.hpp"
#include "cstrack/io.hpp"
#include "cstrack/ops.hpp"
#include "cstrack/training.hpp"
#include "test_support.hpp"

namespace cstrack {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

Scenario short_scenario(ScenarioKind kind, std::size_t length = 12) {
  Scenario s;
  s.kind = kind;
  s.length = length;
  return s;
}

TEST(Generator, SameSeedIsBitwiseIdentical) {
  const Sequence a = gen_sequence(short_scenario(ScenarioKind::clean), 42);
  const Sequence b = gen_sequence(short_scenario(ScenarioKind::clean), 42);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    EXPECT_EQ(a.frames[t].rgb.pixels, b.frames[t].rgb.pixels);
    EXPECT_EQ(a.frames[t].x.pixels, b.frames[t].x.pixels);
    EXPECT_EQ(a.frames[t].gt->x_c, b.frames[t].gt->x_c);
  }
  const Sequence c = gen_sequence(short_scenario(ScenarioKind::clean), 43);
  EXPECT_NE(a.frames[0].rgb.pixels, c.frames[0].rgb.pixels);
}

TEST(Generator, FirstFrameBoxMarksTheHotTarget) {
  const Scenario s = short_scenario(ScenarioKind::clean);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Sequence seq = gen_sequence(s, seed);
    const Frame& f = seq.frames[0];
    ASSERT_TRUE(f.gt);
    const BBox& b = *f.gt;
    EXPECT_GE(b.w, s.min_size);
    EXPECT_LE(b.w, s.max_size);
    EXPECT_GT(b.left(), 0.0);
    EXPECT_LT(b.right(), static_cast<double>(s.width));
    // The target is painted at heat 0.9 over a background below 0.45.
    const auto cx = static_cast<std::size_t>(b.x_c);
    const auto cy = static_cast<std::size_t>(b.y_c);
    EXPECT_GT(f.x.at(0, cy, cx), 0.7) << "seed " << seed;
  }
}

TEST(Generator, ModalityMissingClonesRgb) {
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::modality_missing), 3);
  for (const Frame& f : seq.frames) EXPECT_EQ(f.x.pixels, f.rgb.pixels);
}

TEST(Generator, RgbAdvantageFlattensX) {
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::rgb_advantage), 4);
  for (const Frame& f : seq.frames)
    for (double v : f.x.pixels) EXPECT_LT(std::abs(v - 0.3), 0.3);
  const Sequence clean = gen_sequence(short_scenario(ScenarioKind::clean), 4);
  // Same seed, same motion: only the corruption differs.
  EXPECT_EQ(seq.frames[5].gt->x_c, clean.frames[5].gt->x_c);
}

TEST(Generator, Errors) {
  EXPECT_THROW(gen_sequence(short_scenario(ScenarioKind::clean, 1), 0), ConfigError);
  EXPECT_THROW(parse_scenario("fog"), ConfigError);
  const auto data = gen_dataset(short_scenario(ScenarioKind::clean, 3),
                                {ScenarioKind::clean, ScenarioKind::x_advantage}, 4, 9);
  EXPECT_EQ(data[1].kind, ScenarioKind::x_advantage);
  EXPECT_EQ(data[2].name, "clean_11");
}

ModelConfig small_config() {
  ModelConfig c;
  c.layers = 2;
  return c;
}

TEST(Tracker, OneRecordPerFrameAndFullMemory) {
  const Model model = Model::build(small_config(), 1);
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::clean, 9), 5);
  const TrackResult r = run_tracker(model, seq, {false, true});
  ASSERT_EQ(r.frames.size(), 9u);
  EXPECT_EQ(r.memory_slots, model.config().memory_length);
  EXPECT_EQ(r.heatmaps.size(), 9u);
  // The init frame reports the ground truth it was given.
  EXPECT_EQ(r.frames[0].box.x_c, seq.frames[0].gt->x_c);
  EXPECT_GT(iou(r.frames[0].box, *seq.frames[0].gt), 0.0);
  for (const FrameRecord& f : r.frames) {
    EXPECT_TRUE(std::isfinite(f.box.x_c));
    EXPECT_GT(f.box.w, 0.0);
  }
}

TEST(Tracker, DisablingTcmGivesSpatialOnlyTracker) {
  ModelConfig cfg = small_config();
  cfg.use_tcm = false;
  const Model model = Model::build(cfg, 2);
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::clean, 3), 6);
  const TrackResult r = run_tracker(model, seq);
  EXPECT_EQ(r.memory_slots, 0u);

  // Frame 1 by hand: templates from frame 0, search around the init box,
  // head applied straight to the backbone's search tokens.
  const NoGradScope no_grad(model.params());
  const BBox init = *seq.frames[0].gt;
  const TemplatePair z = crop_template(seq.frames[0], init, cfg.template_size,
                                       cfg.template_factor);
  const CropWindow w = box_window(init, cfg.search_factor, cfg.search_size);
  const Frame& f = seq.frames[1];
  const SpatialOutput sp = model.spatial({z.rgb, z.rgb, crop_resample(f.rgb, w)},
                                         {z.x, z.x, crop_resample(f.x, w)},
                                         f.modality);
  const HeadOutput out = model.predict(sp.s_c, sp.grid);
  const Decoded d = decode_bbox(out.score.value(), out.offset.value(),
                                out.size.value(), sp.grid, cfg.patch);
  const BBox expect = clamp_box(w.to_frame(d.box), 64, 64);
  EXPECT_EQ(r.frames[1].box.x_c, expect.x_c);
  EXPECT_EQ(r.frames[1].box.h, expect.h);
  EXPECT_EQ(r.frames[1].confidence, d.confidence);
}

TEST(Tracker, DeterministicAndRgbOnlyDiffers) {
  const Model model = Model::build(small_config(), 3);
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::x_advantage, 6), 7);
  const TrackResult a = run_tracker(model, seq);
  const TrackResult b = run_tracker(model, seq);
  const TrackResult c = run_tracker(model, seq, {true, false});
  bool differs = false;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    EXPECT_EQ(a.frames[t].box.x_c, b.frames[t].box.x_c);
    EXPECT_EQ(a.frames[t].confidence, b.frames[t].confidence);
    differs |= a.frames[t].confidence != c.frames[t].confidence;
  }
  EXPECT_TRUE(differs);
}

TEST(Tracker, RequiresInitBox) {
  const Model model = Model::build(small_config(), 3);
  Sequence seq = gen_sequence(short_scenario(ScenarioKind::clean, 3), 7);
  seq.frames[0].gt.reset();
  EXPECT_THROW(run_tracker(model, seq), ConfigError);
}

TrackResult result_with_ious(std::vector<double> ious) {
  TrackResult r;
  r.frames.push_back({});  // init frame, never scored
  r.frames[0].iou = 0.0;
  r.frames[0].center_error = 1e9;
  for (double v : ious) {
    FrameRecord f;
    f.iou = v;
    f.center_error = v >= 1.0 ? 0.0 : 30.0;
    r.frames.push_back(f);
  }
  return r;
}

TEST(Metrics, PerfectTracking) {
  const Metrics m = compute_metrics(result_with_ious({1.0, 1.0, 1.0}));
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.success_auc, 1.0);
  EXPECT_EQ(m.mean_iou, 1.0);
  EXPECT_EQ(m.frames, 3u);
}

TEST(Metrics, AllZeroIouCountsOnlyThresholdZero) {
  // Success at θ means IoU ≥ θ, so θ = 0 always succeeds.
  const Metrics m = compute_metrics(result_with_ious({0.0, 0.0}));
  EXPECT_DOUBLE_EQ(m.success_auc, 1.0 / 21.0);
  EXPECT_EQ(m.precision, 0.0);
}

TEST(Metrics, MeanIouArithmetic) {
  EXPECT_DOUBLE_EQ(compute_metrics(result_with_ious({0.5, 0.7})).mean_iou, 0.6);
  // IoU 0.5 passes thresholds 0..0.5 (11 of 21), 0.7 passes 15 of 21.
  EXPECT_DOUBLE_EQ(compute_metrics(result_with_ious({0.5, 0.7})).success_auc,
                   (11.0 + 15.0) / 42.0);
  EXPECT_EQ(compute_metrics(std::vector<TrackResult>{}).frames, 0u);
}

TEST(TemplateUpdate, ThresholdRule) {
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::clean, 4), 8);
  const TemplatePair z0 = crop_template(seq.frames[0], *seq.frames[0].gt, 16, 1.0);
  const TemplatePair z0_copy = z0;
  TemplatePair zt = z0;
  const BBox b = *seq.frames[3].gt;
  EXPECT_FALSE(update_dynamic_template(zt, 0.3, 0.45, seq.frames[3], b, 16, 1.0));
  EXPECT_EQ(zt.rgb.pixels, z0.rgb.pixels);
  EXPECT_FALSE(update_dynamic_template(zt, 0.45, 0.45, seq.frames[3], b, 16, 1.0));
  EXPECT_TRUE(update_dynamic_template(zt, 0.9, 0.7, seq.frames[3], b, 16, 1.0));
  const TemplatePair fresh = crop_template(seq.frames[3], b, 16, 1.0);
  EXPECT_EQ(zt.rgb.pixels, fresh.rgb.pixels);
  EXPECT_EQ(zt.x.pixels, fresh.x.pixels);
  EXPECT_EQ(z0.rgb.pixels, z0_copy.rgb.pixels);
  EXPECT_THROW(update_dynamic_template(zt, 0.9, 1.0, seq.frames[3], b, 16, 1.0),
               ConfigError);
  EXPECT_EQ(default_update_threshold(ModalityTag::thermal), 0.45);
  EXPECT_EQ(default_update_threshold(ModalityTag::depth), 0.7);
}

std::vector<Sequence> tiny_data() {
  return gen_dataset(short_scenario(ScenarioKind::clean, 10),
                     {ScenarioKind::clean, ScenarioKind::x_advantage}, 4, 20);
}

TEST(Training, FramesPerSample) {
  TrainConfig tc;
  EXPECT_EQ(frames_per_sample(1, tc), 1u);
  EXPECT_EQ(frames_per_sample(2, tc), 6u);
  // A stage-2 sample needs six consecutive frames.
  const Model model = Model::build(small_config(), 4);
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::clean, 8), 1);
  Rng rng(0);
  EXPECT_NO_THROW(stage2_loss(model, seq, 2, tc, rng));
  EXPECT_THROW(stage2_loss(model, seq, 3, tc, rng), ConfigError);
}

TEST(Training, StageTwoLeavesSpatialPartsBitwiseUnchanged) {
  Model model = Model::build(small_config(), 5);
  std::vector<std::pair<std::string, Tensor>> before;
  for (const NamedParam& p : model.params().params())
    before.emplace_back(p.name, p.var.value());
  TrainConfig tc;
  tc.stage2_steps = 2;
  tc.batch_size = 2;
  train_stage(model, tiny_data(), tc, 2, 1);
  bool guidance_moved = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const NamedParam& p = model.params().params()[i];
    const bool frozen = p.name.starts_with("embed") || p.name.starts_with("scm") ||
                        p.name.starts_with("backbone");
    if (frozen) {
      EXPECT_EQ(p.var.value(), before[i].second) << p.name;
    } else if (p.name.starts_with("tgm") && p.var.value() != before[i].second) {
      guidance_moved = true;
    }
  }
  EXPECT_TRUE(guidance_moved);
  // Everything is trainable again afterwards.
  EXPECT_EQ(model.params().trainable().size(), model.params().params().size());
}

TEST(Training, FixedBatchLossDecreasesOverTenSteps) {
  Model model = Model::build(small_config(), 6);
  const std::vector<Sequence> data = tiny_data();
  std::vector<FixedSample> batch;
  for (std::size_t i = 0; i < data.size(); ++i)
    batch.push_back({&data[i], 3 + i, 0, 100 + i});
  const std::vector<double> losses = fit_fixed_batch(model, batch, TrainConfig{}, 11);
  for (std::size_t k = 1; k < losses.size(); ++k)
    EXPECT_LT(losses[k], losses[k - 1]) << "step " << k;
}

TEST(Training, StageOneIsDeterministicPerSeed) {
  TrainConfig tc;
  tc.stage1_steps = 2;
  tc.batch_size = 2;
  Model a = Model::build(small_config(), 7);
  Model b = Model::build(small_config(), 7);
  const auto ca = train_stage(a, tiny_data(), tc, 1, 3);
  const auto cb = train_stage(b, tiny_data(), tc, 1, 3);
  ASSERT_EQ(ca.size(), 2u);
  EXPECT_EQ(ca[1].loss, cb[1].loss);
  EXPECT_EQ(a.params().params()[0].var.value(), b.params().params()[0].var.value());
}

TEST(Training, ConfigValidation) {
  TrainConfig tc;
  tc.optimizer = "rmsprop";
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = {};
  tc.lr_stage1 = 0.0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = {};
  tc.optimizer = "adamw";
  EXPECT_NO_THROW(tc.validate());
}

TEST(Optimizers, SingleStepMatchesHandUpdate) {
  Var w = Var::leaf(Tensor::vector({1.0, -2.0}));
  w.node()->grad = Tensor::vector({0.5, 0.25});
  std::vector<Var> ps{w};
  SgdMomentum sgd(0.9, 0.1);
  sgd.step(ps, 0.1);
  EXPECT_DOUBLE_EQ(w.value()[0], 1.0 - 0.1 * (0.5 + 0.1 * 1.0));
  EXPECT_DOUBLE_EQ(w.value()[1], -2.0 - 0.1 * (0.25 - 0.1 * 2.0));

  Var u = Var::leaf(Tensor::vector({1.0}));
  u.node()->grad = Tensor::vector({4.0});
  std::vector<Var> us{u};
  AdamW adam(0.9, 0.999, 0.0, 0.0);
  adam.step(us, 0.01);
  // The first bias-corrected Adam step moves by exactly lr·sign(g).
  EXPECT_NEAR(u.value()[0], 0.99, 1e-12);
}

TEST(Frameworks, CensusOrderAndBranchLengths) {
  std::size_t counts[3];
  const FrameworkKind kinds[] = {FrameworkKind::compact, FrameworkKind::dual_asymmetric,
                                 FrameworkKind::dual_symmetric};
  std::mt19937_64 g(1);
  const ModalityCrops crops{testing::random_image(16, 16, g),
                            testing::random_image(16, 16, g),
                            testing::random_image(32, 32, g)};
  for (std::size_t nq : {0u, 2u, 4u}) {
    for (int k = 0; k < 3; ++k) {
      ModelConfig cfg;
      cfg.framework = kinds[k];
      cfg.n_q = nq;
      const Model m = Model::build(cfg, 1);
      counts[k] = m.parameter_count();
      const SpatialOutput sp = m.spatial(crops, crops, ModalityTag::thermal);
      std::size_t total = 0;
      for (std::size_t l : sp.branch_lengths) total += l;
      if (k == 0) {
        EXPECT_EQ(total, 2 * nq + 24);
      } else {
        EXPECT_EQ(sp.branch_lengths, (std::vector<std::size_t>{24, 24}));
      }
      EXPECT_EQ(sp.s_c.shape(), (Shape{16, 32}));
    }
    EXPECT_LT(counts[0], counts[1]);
    EXPECT_LT(counts[1], counts[2]);
  }
}

TEST(Frameworks, CensusSumsToTotal) {
  ModelConfig cfg;
  cfg.framework = FrameworkKind::dual_symmetric;
  const Model m = Model::build(cfg, 2);
  std::size_t total = 0;
  for (const auto& [group, n] : m.census()) total += n;
  EXPECT_EQ(total, m.parameter_count());
  EXPECT_EQ(m.census().front().first, "embed");
}

TEST(Frameworks, ZeroInteractionDecouplesSymmetricBranches) {
  ModelConfig cfg;
  cfg.framework = FrameworkKind::dual_symmetric;
  cfg.layers = 2;
  Model m = Model::build(cfg, 3);
  for (SymmetricLayer& l : m.symmetric_layers()) {
    l.psi_ca.fc3.zero();
    l.psi_ffn.fc3.zero();
  }
  std::mt19937_64 g(4);
  const Var fr = Var::constant(random_tensor({24, 32}, g));
  const Var fx1 = Var::constant(random_tensor({24, 32}, g));
  const Var fx2 = Var::constant(random_tensor({24, 32}, g));
  const SymmetricLayer& l = m.symmetric_layers()[0];
  const auto [r1, x1] = symmetric_layer(l, fr, fx1);
  const auto [r2, x2] = symmetric_layer(l, fr, fx2);
  EXPECT_EQ(r1.value(), r2.value());
  EXPECT_GT(max_abs_diff(x1.value(), x2.value()), 1e-6);

  // With interaction live, the RGB branch does see X.
  Model live = Model::build(cfg, 3);
  const SymmetricLayer& ll = live.symmetric_layers()[0];
  EXPECT_GT(max_abs_diff(symmetric_layer(ll, fr, fx1).first.value(),
                         symmetric_layer(ll, fr, fx2).first.value()),
            1e-9);
}

TEST(Frameworks, ConfigValidation) {
  ModelConfig cfg;
  cfg.heads = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_m = 17;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_framework("triple"), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  Model a = Model::build(small_config(), 8);
  Model b = Model::build(small_config(), 9);
  std::stringstream buf;
  save_parameters(buf, a.params());
  const std::string text = buf.str();
  EXPECT_EQ(text.rfind("CSTRACK-PARAMS 1\ntensors ", 0), 0u);
  load_parameters(buf, b.params());
  for (std::size_t i = 0; i < a.params().params().size(); ++i)
    EXPECT_EQ(a.params().params()[i].var.value(), b.params().params()[i].var.value());
}

TEST(Checkpoint, RejectsMismatchAndCorruption) {
  Model a = Model::build(small_config(), 8);
  ModelConfig other = small_config();
  other.layers = 3;
  Model b = Model::build(other, 8);
  std::stringstream buf;
  save_parameters(buf, a.params());
  EXPECT_THROW(load_parameters(buf, b.params()), ConfigError);

  std::string text;
  {
    std::stringstream s;
    save_parameters(s, a.params());
    text = s.str();
  }
  std::stringstream truncated(text.substr(0, text.size() - 3));
  EXPECT_THROW(load_parameters(truncated, a.params()), IoError);
  std::stringstream bad("CSTRACK-PARAMS 2\n");
  EXPECT_THROW(load_parameters(bad, a.params()), IoError);
}

TEST(Manifest, WriteThenLoadRoundTrips) {
  const auto dir = std::filesystem::temp_directory_path() / "cstrack_manifest_test";
  std::filesystem::remove_all(dir);
  const Sequence seq = gen_sequence(short_scenario(ScenarioKind::clean, 3), 10);
  write_sequence(dir, seq);
  const Sequence back = load_manifest(dir / "manifest.txt");
  ASSERT_EQ(back.frames.size(), 3u);
  EXPECT_EQ(back.frames[2].gt->x_c, seq.frames[2].gt->x_c);
  EXPECT_EQ(back.frames[0].modality, ModalityTag::thermal);
  for (std::size_t i = 0; i < seq.frames[1].rgb.pixels.size(); ++i)
    ASSERT_LE(std::abs(back.frames[1].rgb.pixels[i] - seq.frames[1].rgb.pixels[i]),
              0.5 / 255.0 + 1e-12);
  std::filesystem::remove_all(dir);
}

TEST(Manifest, CommentsTagsAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "cstrack_manifest_err";
  std::filesystem::create_directories(dir);
  write_ppm(dir / "a.ppm", Image(8, 8));
  {
    std::ofstream m(dir / "m.txt");
    m << "# modality: depth\n\na.ppm a.ppm 4 4 2 2  # trailing comment\na.ppm a.ppm\n";
  }
  const Sequence s = load_manifest(dir / "m.txt");
  ASSERT_EQ(s.frames.size(), 2u);
  EXPECT_EQ(s.frames[1].modality, ModalityTag::depth);
  EXPECT_TRUE(s.frames[0].gt);
  EXPECT_FALSE(s.frames[1].gt);
  {
    std::ofstream m(dir / "bad.txt");
    m << "a.ppm a.ppm 1 2 3\n";
  }
  EXPECT_THROW(load_manifest(dir / "bad.txt"), IoError);
  EXPECT_THROW(load_manifest(dir / "missing.txt"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace cstrack
