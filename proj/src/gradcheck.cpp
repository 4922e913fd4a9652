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

#include "cstrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "cstrack/error.hpp"

namespace cstrack {
namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

double probe(Tensor& value, std::size_t i, double step,
             const std::function<double()>& eval) {
  const double original = value[i];
  value[i] = original + step;
  const double plus = eval();
  value[i] = original - step;
  const double minus = eval();
  value[i] = original;
  return (plus - minus) / (2.0 * step);
}

}  // namespace

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double step) {
  Var leaf = Var::leaf(x, true);
  Var out = f(leaf);
  backward(out);
  const Tensor analytic = leaf.grad();

  Var probe_leaf = Var::leaf(x, false);
  auto eval = [&] { return f(probe_leaf).value().item(); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fd = probe(probe_leaf.mutable_value(), i, step, eval);
    worst = std::max(worst, relative_error(analytic[i], fd));
  }
  return worst;
}

double grad_check_params(const std::function<Var()>& loss,
                         std::span<Var> params,
                         const ParamCheckOptions& options) {
  for (Var& p : params) p.zero_grad();
  backward(loss());
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Var& p : params) analytic.push_back(p.grad());
  for (Var& p : params) p.zero_grad();

  std::mt19937_64 rng(options.seed);
  auto eval = [&] { return loss().value().item(); };
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k].mutable_value();
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 &&
        coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
    }
    for (std::size_t i : coords) {
      const double fd = probe(value, i, options.step, eval);
      worst = std::max(worst, relative_error(analytic[k][i], fd));
    }
  }
  return worst;
}

}  // namespace cstrack
