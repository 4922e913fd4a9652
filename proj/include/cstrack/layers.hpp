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
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cstrack/autograd.hpp"

namespace cstrack {

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Var var;
};

/// Ordered registry of every learnable leaf of a model. Names are dotted
/// paths; the first component names the submodule for parameter census.
class ParamStore {
 public:
  Var add(std::string name, Tensor init);

  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<NamedParam>& params() { return params_; }
  Var get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t count(std::string_view prefix = {}) const;
  /// Element counts grouped by the first dotted component, in insertion order
  /// of first appearance.
  std::vector<std::pair<std::string, std::size_t>> census() const;

  void zero_grad();
  void set_trainable(std::string_view prefix, bool trainable);
  std::vector<Var> trainable() const;
  std::vector<Var> matching(std::string_view prefix) const;

 private:
  std::vector<NamedParam> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor normal_init(Shape shape, double stddev, Rng& rng);

struct Linear {
  Var weight;  // [in × out]
  Var bias;    // [out]

  static Linear create(ParamStore& store, const std::string& name,
                       std::size_t in, std::size_t out, Rng& rng);
  Var operator()(const Var& x) const;
  /// Zeroes weight and bias; used to build residual-passthrough fixtures.
  void zero();
};

struct LayerNormParams {
  Var gamma;
  Var beta;
  double eps = 1e-5;

  static LayerNormParams create(ParamStore& store, const std::string& name,
                                std::size_t dim);
  Var operator()(const Var& x) const;
};

/// Multi-head attention: queries from `a`, keys and values from `b`.
struct Attention {
  Linear q, k, v, out;
  std::size_t heads = 1;

  static Attention create(ParamStore& store, const std::string& name,
                          std::size_t dim, std::size_t heads, Rng& rng);
  Var operator()(const Var& a, const Var& b,
                 std::vector<Tensor>* probabilities = nullptr) const;
};

/// Two-layer perceptron with GELU: in → hidden → out.
struct FeedForward {
  Linear fc1, fc2;

  static FeedForward create(ParamStore& store, const std::string& name,
                            std::size_t dim, std::size_t hidden, Rng& rng);
  Var operator()(const Var& x) const;
};

/// Norm(a + Attention(a, b)).
Var attend_residual(const Attention& attn, const LayerNormParams& norm,
                    const Var& a, const Var& b);
/// Norm(x + FFN(x)).
Var ffn_residual(const FeedForward& ffn, const LayerNormParams& norm,
                 const Var& x);

}  // namespace cstrack
