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
#include <span>

#include "cstrack/autograd.hpp"

namespace cstrack {

/// Finite-difference verification of reverse-mode gradients.
///
/// Error per coordinate is |analytic − fd| / max(1, |fd|) with fd the central
/// difference (f(x + h·e_i) − f(x − h·e_i)) / 2h; the maximum is returned.

/// `f` builds a scalar graph from a leaf bound to `x`.
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double step = 1e-4);

struct ParamCheckOptions {
  double step = 1e-4;
  /// Coordinates probed per parameter tensor; 0 probes every coordinate.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

/// Checks ∂loss/∂p for each parameter leaf. `loss` is re-evaluated with the
/// parameters perturbed in place; values are restored afterwards. Gradients
/// on the parameters are cleared before and after.
double grad_check_params(const std::function<Var()>& loss,
                         std::span<Var> params,
                         const ParamCheckOptions& options = {});

}  // namespace cstrack
