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

namespace cstrack {

struct SuiteResult {
  std::string module;
  double max_rel_err = 0.0;
  std::size_t checks = 0;  // inputs plus parameter tensors probed
};

struct SuiteOptions {
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t n_q = 4;
  std::size_t n_z = 4;
  std::size_t n_s = 16;  // square grid
  std::size_t memory_tokens = 16;
  /// Parameter coordinates probed per tensor; inputs are probed in full.
  std::size_t coords_per_param = 6;
  std::uint64_t seed = 1;
};

/// Finite-difference suites for SCM, an encoder block, the guidance module,
/// the head, and each loss term, in float64 with central step 1e-4.
std::vector<SuiteResult> run_gradcheck_suites(const SuiteOptions& options = {});

}  // namespace cstrack
