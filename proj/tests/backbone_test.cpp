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

#include <numeric>

#include "cstrack/backbone.hpp"
#include "cstrack/error.hpp"
#include "cstrack/gradcheck.hpp"
#include "cstrack/ops.hpp"
#include "test_support.hpp"

namespace cstrack {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

constexpr std::size_t kDim = 8;

CompactFeature random_feature(std::mt19937_64& g, std::size_t nq) {
  CompactFeature f;
  f.n_q = nq;
  f.n_z = 4;
  f.n_s = 16;
  f.grid = {4, 4};
  f.tokens = Var::constant(random_tensor({f.length(), kDim}, g));
  return f;
}

BackboneParams make_backbone(ParamStore& store, std::size_t layers = 2) {
  Rng rng(1);
  return BackboneParams::create(store, "backbone", kDim, layers, 2, 4 * kDim,
                                rng);
}

Tensor plain_norm(const Tensor& x) {
  const Var one = Var::constant(Tensor(Shape{x.cols()}, 1.0));
  const Var zero = Var::constant(Tensor(Shape{x.cols()}, 0.0));
  return layer_norm(Var::constant(x), one, zero).value();
}

TEST(Encode, ShapePreservedAndZeroProjectionsNormalise) {
  std::mt19937_64 g(2);
  const CompactFeature f = random_feature(g, 4);
  ParamStore store;
  BackboneParams p = make_backbone(store, 4);
  const CompactFeature out = encode(f, p);
  EXPECT_EQ(out.tokens.shape(), f.tokens.shape());
  EXPECT_EQ(out.length(), 32u);
  for (EncoderBlock& b : p.blocks) {
    b.attn.out.zero();
    b.ffn.fc2.zero();
  }
  EXPECT_LT(max_abs_diff(encode(f, p).tokens.value(), plain_norm(f.tokens.value())),
            1e-12);
}

TEST(Encode, AttentionRowsSumToOne) {
  std::mt19937_64 g(3);
  const CompactFeature f = random_feature(g, 4);
  ParamStore store;
  const BackboneParams p = make_backbone(store);
  std::vector<Tensor> probs;
  encode(f, p, &probs);
  ASSERT_EQ(probs.size(), 2u * 2u);  // layers × heads
  for (const Tensor& a : probs) {
    ASSERT_EQ(a.shape(), (Shape{32, 32}));
    for (std::size_t r = 0; r < 32; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 32; ++c) s += a.at(r, c);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Encode, LayoutMismatch) {
  std::mt19937_64 g(4);
  CompactFeature f = random_feature(g, 4);
  f.n_q = 3;
  ParamStore store;
  EXPECT_THROW(encode(f, make_backbone(store)), DimensionError);
  EXPECT_THROW(split_features(f), InternalError);
}

TEST(Split, SegmentBoundaries) {
  std::mt19937_64 g(5);
  const CompactFeature f = random_feature(g, 4);
  EXPECT_EQ(f.search_begin(), 16u);
  const SplitFeatures s = split_features(f);
  EXPECT_EQ(s.q_r.rows(), 4u);
  EXPECT_EQ(s.q_x.rows(), 4u);
  EXPECT_EQ(s.z_c.rows(), 8u);
  EXPECT_EQ(s.s_c.rows(), 16u);
  EXPECT_EQ(s.s_c.value().at(0, 1), f.tokens.value().at(16, 1));
  const Var parts[] = {s.q_r, s.q_x, s.z_c, s.s_c};
  EXPECT_EQ(concat_rows(parts).value(), f.tokens.value());
}

TEST(Split, NoQueries) {
  std::mt19937_64 g(6);
  const CompactFeature f = random_feature(g, 0);
  const SplitFeatures s = split_features(f);
  EXPECT_EQ(s.q_r.rows(), 0u);
  EXPECT_EQ(s.q_x.rows(), 0u);
  EXPECT_EQ(s.z_c.value().at(0, 0), f.tokens.value().at(0, 0));
  const CompactFeature enc = encode(f, [] {
    static ParamStore store;
    return make_backbone(store);
  }());
  const SplitFeatures e = split_features(enc);
  const Var parts[] = {e.q_r, e.q_x, e.z_c, e.s_c};
  EXPECT_EQ(concat_rows(parts).value(), enc.tokens.value());
}

TEST(Encode, SearchPermutationEquivariance) {
  std::mt19937_64 g(7);
  const CompactFeature f = random_feature(g, 4);
  ParamStore store;
  const BackboneParams p = make_backbone(store);
  const Tensor base = encode(f, p).tokens.value();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> perm(32);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin() + 16, perm.end(), g);
    CompactFeature moved = f;
    moved.tokens = gather_rows(f.tokens, perm);
    const Tensor out = encode(moved, p).tokens.value();
    const Tensor expect = gather_rows(Var::constant(base), perm).value();
    EXPECT_LT(max_abs_diff(out, expect), 1e-12);
  }
}

TEST(Encode, BlockGradCheck) {
  std::mt19937_64 g(8);
  ParamStore store;
  Rng rng(9);
  const EncoderBlock block =
      EncoderBlock::create(store, "blk", kDim, 2, 2 * kDim, rng);
  const Tensor x = random_tensor({6, kDim}, g);
  const Var w = Var::constant(random_tensor({6, kDim}, g));
  EXPECT_LT(grad_check([&](const Var& in) { return sum(mul(block(in), w)); }, x),
            1e-4);
  std::vector<Var> params;
  for (const auto& np : store.params()) params.push_back(np.var);
  ParamCheckOptions opt;
  opt.max_coords_per_param = 8;
  EXPECT_LT(grad_check_params(
                [&] { return sum(mul(block(Var::constant(x)), w)); }, params, opt),
            1e-4);
}

}  // namespace
}  // namespace cstrack
