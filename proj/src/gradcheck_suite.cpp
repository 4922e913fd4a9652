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

#include "cstrack/gradcheck_suite.hpp"

#include <cmath>
#include <random>

#include "cstrack/backbone.hpp"
#include "cstrack/error.hpp"
#include "cstrack/gradcheck.hpp"
#include "cstrack/guidance_head.hpp"
#include "cstrack/ops.hpp"
#include "cstrack/scm.hpp"

namespace cstrack {
namespace {

Tensor uniform(Shape shape, std::mt19937_64& g, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = d(g);
  return t;
}

std::vector<Var> all_params(const ParamStore& store) {
  std::vector<Var> out;
  for (const NamedParam& p : store.params()) out.push_back(p.var);
  return out;
}

// Random projection of a matrix output to a scalar.
Var probe(const Var& out, const Var& weights) { return sum(mul(out, weights)); }

}  // namespace

std::vector<SuiteResult> run_gradcheck_suites(const SuiteOptions& o) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(o.n_s)));
  if (side * side != o.n_s) throw ConfigError("gradcheck: n_s must be a square");
  std::mt19937_64 g(o.seed);
  Rng rng(o.seed + 1);
  ParamCheckOptions popt;
  popt.max_coords_per_param = o.coords_per_param;
  popt.seed = o.seed;
  const std::size_t d = o.dim, hidden = 4 * o.dim;
  const GridShape grid{side, side};
  std::vector<SuiteResult> results;

  {
    ParamStore store;
    const ScmParams p = ScmParams::create(store, d, o.n_q, o.heads, hidden, rng);
    auto stream = [&] {
      return assemble_stream(Var::constant(uniform({o.n_z, d}, g)),
                             Var::constant(uniform({o.n_z, d}, g)),
                             Var::constant(uniform({o.n_s, d}, g)), grid);
    };
    const TokenStream fr = stream(), fx = stream();
    const Var w = Var::constant(uniform({2 * o.n_q + 2 * o.n_z + o.n_s, d}, g));
    double err = grad_check(
        [&](const Var& x) {
          TokenStream r = fr;
          r.tokens = x;
          return probe(scm_forward(r, fx, p).tokens, w);
        },
        fr.tokens.value());
    auto params = all_params(store);
    err = std::max(err, grad_check_params(
                            [&] { return probe(scm_forward(fr, fx, p).tokens, w); },
                            params, popt));
    results.push_back({"scm", err, params.size() + 1});
  }

  {
    ParamStore store;
    const EncoderBlock b = EncoderBlock::create(store, "block", d, o.heads, hidden, rng);
    const std::size_t n = 2 * o.n_q + 2 * o.n_z + o.n_s;
    const Tensor x0 = uniform({n, d}, g);
    const Var w = Var::constant(uniform({n, d}, g));
    double err = grad_check([&](const Var& x) { return probe(b(x), w); }, x0);
    auto params = all_params(store);
    err = std::max(err, grad_check_params(
                            [&] { return probe(b(Var::constant(x0)), w); }, params, popt));
    results.push_back({"backbone_block", err, params.size() + 1});
  }

  {
    ParamStore store;
    const GuidanceParams p = GuidanceParams::create(store, "tgm", d, o.heads, hidden, rng);
    const Tensor s0 = uniform({o.n_s, d}, g);
    const Tensor m0 = uniform({o.memory_tokens, d}, g);
    const Var w = Var::constant(uniform({o.n_s, d}, g));
    double err = grad_check(
        [&](const Var& s) { return probe(guide(s, Var::constant(m0), p), w); }, s0);
    err = std::max(err, grad_check(
                            [&](const Var& m) { return probe(guide(Var::constant(s0), m, p), w); },
                            m0));
    auto params = all_params(store);
    err = std::max(err, grad_check_params(
                            [&] { return probe(guide(Var::constant(s0), Var::constant(m0), p), w); },
                            params, popt));
    results.push_back({"tgm", err, params.size() + 2});
  }

  {
    ParamStore store;
    const HeadParams head = HeadParams::create(store, "head", d, 8, rng);
    const Var s = Var::constant(uniform({o.n_s, d}, g));
    const std::size_t patch = 8;
    const double extent = static_cast<double>(side * patch);
    const BBox gt{0.41 * extent, 0.68 * extent, 0.37 * extent, 0.28 * extent};
    auto params = all_params(store);
    const double err = grad_check_params(
        [&] { return head_loss(head_forward(s, grid, head), gt, patch).total; }, params, popt);
    results.push_back({"head", err, params.size()});
  }

  // Loss terms on boxes whose edges are pairwise distinct: min/max kinks
  // would otherwise make the central difference one-sided.
  const Tensor a0 = Tensor::matrix(1, 4, {0.42, 0.53, 0.2, 0.3});
  const Var b = Var::constant(Tensor::matrix(1, 4, {0.5, 0.45, 0.25, 0.2}));
  const Tensor gt_map = gt_score_map({13, 22, 12, 9}, grid, 8);
  const Tensor logits0 = uniform({o.n_s, 1}, g, -2.0, 2.0);
  results.push_back({"focal_loss",
                     grad_check([&](const Var& s) { return focal_loss(s, gt_map); }, logits0),
                     1});
  results.push_back(
      {"giou_loss", grad_check([&](const Var& a) { return giou_loss(a, b); }, a0), 1});
  results.push_back(
      {"l1_loss", grad_check([&](const Var& a) { return l1_loss(a, b); }, a0), 1});
  {
    double err = grad_check(
        [&](const Var& s) { return total_loss(s, gt_map, Var::constant(a0), b).total; },
        logits0);
    err = std::max(err, grad_check(
                            [&](const Var& a) {
                              return total_loss(Var::constant(logits0), gt_map, a, b).total;
                            },
                            a0));
    results.push_back({"total_loss", err, 2});
  }
  return results;
}

}  // namespace cstrack
