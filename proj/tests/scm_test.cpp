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

#include "cstrack/error.hpp"
#include "cstrack/gradcheck.hpp"
#include "cstrack/ops.hpp"
#include "cstrack/scm.hpp"
#include "test_support.hpp"

namespace cstrack {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

constexpr std::size_t kDim = 8;

TokenStream random_stream(std::mt19937_64& g, std::size_t nz = 4,
                          std::size_t ns = 16) {
  const std::size_t side = ns == 16 ? 4 : ns;
  return assemble_stream(Var::constant(random_tensor({nz, kDim}, g)),
                         Var::constant(random_tensor({nz, kDim}, g)),
                         Var::constant(random_tensor({ns, kDim}, g)),
                         {side, ns / side});
}

ScmParams make_params(ParamStore& store, std::size_t nq, std::uint64_t seed) {
  Rng rng(seed);
  return ScmParams::create(store, kDim, nq, 2, 4 * kDim, rng);
}

Tensor plain_norm(const Tensor& x) {
  const Var one = Var::constant(Tensor(Shape{x.cols()}, 1.0));
  const Var zero = Var::constant(Tensor(Shape{x.cols()}, 0.0));
  return layer_norm(Var::constant(x), one, zero).value();
}

TEST(CompactFuse, Properties) {
  std::mt19937_64 g(1);
  const Var a = Var::constant(random_tensor({24, kDim}, g));
  const Var b = Var::constant(random_tensor({24, kDim}, g));
  const Var z = Var::constant(Tensor(Shape{24, kDim}, 0.0));
  EXPECT_EQ(compact_fuse(a, z).value(), a.value());
  EXPECT_EQ(compact_fuse(a, a).value(), scale(a, 2.0).value());
  EXPECT_EQ(compact_fuse(a, b).value(), compact_fuse(b, a).value());
  EXPECT_THROW(compact_fuse(a, Var::constant(Tensor(Shape{23, kDim}))),
               DimensionError);
}

TEST(CrossAttend, ZeroOutputProjectionIsNormPassthrough) {
  ParamStore store;
  ScmParams p = make_params(store, 4, 2);
  p.attn_r.out.zero();
  std::mt19937_64 g(3);
  const Var a = Var::constant(random_tensor({28, kDim}, g));
  const Var b = Var::constant(random_tensor({28, kDim}, g));
  const Var out = cross_attend_block(a, b, p.attn_r, p.norm_attn_r);
  EXPECT_EQ(out.rows(), a.rows());
  EXPECT_LT(max_abs_diff(out.value(), plain_norm(a.value())), 1e-12);
}

TEST(CrossAttend, KeysMayHaveDifferentLength) {
  ParamStore store;
  const ScmParams p = make_params(store, 4, 2);
  std::mt19937_64 g(3);
  const Var a = Var::constant(random_tensor({5, kDim}, g));
  const Var b = Var::constant(random_tensor({9, kDim}, g));
  EXPECT_EQ(cross_attend_block(a, b, p.attn_r, p.norm_attn_r).rows(), 5u);
  EXPECT_THROW(cross_attend_block(a, Var::constant(Tensor(Shape{9, 4})),
                                  p.attn_r, p.norm_attn_r),
               DimensionError);
}

TEST(ScmForward, OutputLengths) {
  std::mt19937_64 g(4);
  const TokenStream fr = random_stream(g), fx = random_stream(g);
  for (std::size_t nq : {0u, 2u, 4u}) {
    ParamStore store;
    const ScmParams p = make_params(store, nq, 5);
    const CompactFeature c = scm_forward(fr, fx, p);
    EXPECT_EQ(c.tokens.rows(), 2 * nq + 24);
    EXPECT_EQ(c.length(), 2 * nq + 24);
    EXPECT_EQ(c.search_begin(), 2 * nq + 8);
    EXPECT_LT(c.length(), fr.length() + fx.length());
  }
}

TEST(ScmForward, NoQueriesVariantIsPlainFusion) {
  std::mt19937_64 g(6);
  const TokenStream fr = random_stream(g), fx = random_stream(g);
  ParamStore store;
  const ScmParams p = make_params(store, 0, 7);
  const CompactFeature c = scm_forward(fr, fx, p, ScmVariant::no_queries);
  EXPECT_EQ(c.length(), 24u);
  EXPECT_EQ(c.n_q, 0u);
  // Identical to the full path with an empty query set.
  EXPECT_EQ(c.tokens.value(), scm_forward(fr, fx, p).tokens.value());

  ParamStore with_q;
  const ScmParams pq = make_params(with_q, 4, 7);
  EXPECT_THROW(scm_forward(fr, fx, pq, ScmVariant::no_queries), ConfigError);
}

TEST(ScmForward, ZeroProjectionsGiveClosedForm) {
  std::mt19937_64 g(8);
  const TokenStream fr = random_stream(g), fx = random_stream(g);
  ParamStore store;
  ScmParams p = make_params(store, 4, 9);
  p.attn_r.out.zero();
  p.attn_x.out.zero();
  p.ffn_r.fc2.zero();
  p.ffn_x.fc2.zero();
  const CompactFeature c = scm_forward(fr, fx, p);
  const Tensor fused = slice_rows(c.tokens, 8, 32).value();
  Tensor expect = plain_norm(plain_norm(fr.tokens.value()));
  kernels::add_inplace(expect, plain_norm(plain_norm(fx.tokens.value())), 1.0);
  EXPECT_LT(max_abs_diff(fused, expect), 1e-12);
  const Tensor qr = slice_rows(c.tokens, 0, 4).value();
  EXPECT_LT(max_abs_diff(qr, plain_norm(plain_norm(p.q_r.value()))), 1e-12);
}

TEST(ScmForward, XSideReadsUpdatedRgbSide) {
  std::mt19937_64 g(10);
  const TokenStream fr = random_stream(g), fx = random_stream(g);
  for (ScmVariant v : {ScmVariant::full, ScmVariant::no_cross_attention}) {
    ParamStore store;
    ScmParams p = make_params(store, 4, 11);
    const Tensor before = scm_forward(fr, fx, p, v).tokens.value();
    // Perturb only the RGB-side attention; the X-side queries change only if
    // the X block attends to the RGB block's output.
    for (double& w : p.attn_r.v.weight.mutable_value().values()) w *= 1.5;
    const Tensor after = scm_forward(fr, fx, p, v).tokens.value();
    const double dq_x = max_abs_diff(slice_rows(Var::constant(before), 4, 8).value(),
                                     slice_rows(Var::constant(after), 4, 8).value());
    if (v == ScmVariant::full) {
      EXPECT_GT(dq_x, 1e-6);
    } else {
      EXPECT_EQ(dq_x, 0.0);
    }
  }
}

TEST(ScmForward, SwappingModalitiesChangesOutput) {
  std::mt19937_64 g(12);
  const TokenStream fr = random_stream(g), fx = random_stream(g);
  ParamStore store;
  const ScmParams p = make_params(store, 4, 13);
  const Tensor ab = scm_forward(fr, fx, p).tokens.value();
  const Tensor ba = scm_forward(fx, fr, p).tokens.value();
  EXPECT_GT(max_abs_diff(ab, ba), 1e-6);
}

TEST(ScmForward, LayoutMismatch) {
  std::mt19937_64 g(14);
  ParamStore store;
  const ScmParams p = make_params(store, 4, 15);
  EXPECT_THROW(scm_forward(random_stream(g), random_stream(g, 2, 16), p),
               DimensionError);
  EXPECT_EQ(parse_scm_variant("no_cross_attention"),
            ScmVariant::no_cross_attention);
  EXPECT_THROW(parse_scm_variant("bogus"), ConfigError);
}

TEST(ScmForward, GradCheck) {
  std::mt19937_64 g(16);
  ParamStore store;
  const ScmParams p = make_params(store, 2, 17);
  const TokenStream fr = assemble_stream(
      Var::constant(random_tensor({1, kDim}, g)),
      Var::constant(random_tensor({1, kDim}, g)),
      Var::constant(random_tensor({4, kDim}, g)), {2, 2});
  const TokenStream fx = assemble_stream(
      Var::constant(random_tensor({1, kDim}, g)),
      Var::constant(random_tensor({1, kDim}, g)),
      Var::constant(random_tensor({4, kDim}, g)), {2, 2});
  const Var weights = Var::constant(random_tensor({10, kDim}, g));
  auto loss = [&] {
    return sum(mul(scm_forward(fr, fx, p).tokens, weights));
  };
  std::vector<Var> params;
  for (const auto& np : store.params()) params.push_back(np.var);
  ParamCheckOptions opt;
  opt.max_coords_per_param = 6;
  EXPECT_LT(grad_check_params(loss, params, opt), 1e-4);
}

}  // namespace
}  // namespace cstrack
