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
#include <span>
#include <vector>

#include "cstrack/autograd.hpp"

namespace cstrack {

// Differentiable operations. Matrices are [rows × cols]; a "row vector" is
// either rank 1 or [1 × n]. Every op throws NumericError on non-finite output.

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a · bᵀ
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var div(const Var& a, const Var& b);  // elementwise
Var maximum(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row_bias(const Var& x, const Var& bias);  // x[n×d] + bias[d]

/// y = x·W + b, W: [in × out], b: [out].
Var linear(const Var& x, const Var& weight, const Var& bias);

Var gelu(const Var& x);  // tanh approximation
Var sigmoid(const Var& x);
Var abs(const Var& x);
Var square(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

Var softmax_rows(const Var& m);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta,
               double eps = 1e-5);

/// softmax(Q·Kᵀ/√d_h)·V per head over column slices of width d/n_heads,
/// heads concatenated along columns. When `probabilities` is non-null the
/// per-head attention matrices ([a × b] each) are appended to it.
Var scaled_attention(const Var& q, const Var& k, const Var& v,
                     std::size_t n_heads = 1,
                     std::vector<Tensor>* probabilities = nullptr);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var reshape(const Var& x, Shape shape);
/// Rows of `x` in the given order; repeated indices accumulate gradient.
Var gather_rows(const Var& x, std::span<const std::size_t> rows);

/// 3×3 neighbourhood gather over tokens laid out row-major on a
/// rows × cols grid: out[p, k·C + c] = x[neighbour_k(p), c], zero padded.
/// Followed by a matmul this is a same-padding 3×3 convolution.
Var neighbours3x3(const Var& x, std::size_t grid_rows, std::size_t grid_cols);

/// Penalty-reduced pixelwise focal loss on logits against a Gaussian target
/// map; positives are entries equal to exactly 1. Normalised by the positive
/// count (at least 1).
Var focal_loss(const Var& logits, const Tensor& target, double alpha = 2.0,
               double beta = 4.0);

}  // namespace cstrack
