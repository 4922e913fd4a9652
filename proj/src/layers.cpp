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

#include "cstrack/layers.hpp"

#include <algorithm>
#include <cmath>

#include "cstrack/error.hpp"
#include "cstrack/ops.hpp"

namespace cstrack {

Var ParamStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) {
    throw InternalError("duplicate parameter name '" + name + "'");
  }
  Var v = Var::leaf(std::move(init), true);
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), v});
  return v;
}

Var ParamStore::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }
  return params_[it->second].var;
}

bool ParamStore::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

std::size_t ParamStore::count(std::string_view prefix) const {
  std::size_t total = 0;
  for (const NamedParam& p : params_)
    if (p.name.starts_with(prefix)) total += p.var.value().size();
  return total;
}

std::vector<std::pair<std::string, std::size_t>> ParamStore::census() const {
  std::vector<std::pair<std::string, std::size_t>> rows;
  for (const NamedParam& p : params_) {
    const std::string group = p.name.substr(0, p.name.find('.'));
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const auto& r) { return r.first == group; });
    if (it == rows.end()) {
      rows.emplace_back(group, p.var.value().size());
    } else {
      it->second += p.var.value().size();
    }
  }
  return rows;
}

void ParamStore::zero_grad() {
  for (NamedParam& p : params_) p.var.zero_grad();
}

void ParamStore::set_trainable(std::string_view prefix, bool trainable) {
  for (NamedParam& p : params_)
    if (p.name.starts_with(prefix)) p.var.set_requires_grad(trainable);
}

std::vector<Var> ParamStore::trainable() const {
  std::vector<Var> out;
  for (const NamedParam& p : params_)
    if (p.var.requires_grad()) out.push_back(p.var);
  return out;
}

std::vector<Var> ParamStore::matching(std::string_view prefix) const {
  std::vector<Var> out;
  for (const NamedParam& p : params_)
    if (p.name.starts_with(prefix)) out.push_back(p.var);
  return out;
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(Shape{fan_in, fan_out});
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Linear Linear::create(ParamStore& store, const std::string& name,
                      std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.weight = store.add(name + ".weight", xavier_uniform(in, out, rng));
  l.bias = store.add(name + ".bias", Tensor(Shape{out}));
  return l;
}

Var Linear::operator()(const Var& x) const { return linear(x, weight, bias); }

void Linear::zero() {
  weight.mutable_value().fill(0.0);
  bias.mutable_value().fill(0.0);
}

LayerNormParams LayerNormParams::create(ParamStore& store,
                                        const std::string& name,
                                        std::size_t dim) {
  LayerNormParams n;
  n.gamma = store.add(name + ".gamma", Tensor(Shape{dim}, 1.0));
  n.beta = store.add(name + ".beta", Tensor(Shape{dim}, 0.0));
  return n;
}

Var LayerNormParams::operator()(const Var& x) const {
  return layer_norm(x, gamma, beta, eps);
}

Attention Attention::create(ParamStore& store, const std::string& name,
                            std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError(name + ": width " + std::to_string(dim) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  Attention a;
  a.q = Linear::create(store, name + ".q", dim, dim, rng);
  a.k = Linear::create(store, name + ".k", dim, dim, rng);
  a.v = Linear::create(store, name + ".v", dim, dim, rng);
  a.out = Linear::create(store, name + ".out", dim, dim, rng);
  a.heads = heads;
  return a;
}

Var Attention::operator()(const Var& a, const Var& b,
                          std::vector<Tensor>* probabilities) const {
  return out(scaled_attention(q(a), k(b), v(b), heads, probabilities));
}

FeedForward FeedForward::create(ParamStore& store, const std::string& name,
                                std::size_t dim, std::size_t hidden,
                                Rng& rng) {
  FeedForward f;
  f.fc1 = Linear::create(store, name + ".fc1", dim, hidden, rng);
  f.fc2 = Linear::create(store, name + ".fc2", hidden, dim, rng);
  return f;
}

Var FeedForward::operator()(const Var& x) const { return fc2(gelu(fc1(x))); }

Var attend_residual(const Attention& attn, const LayerNormParams& norm,
                    const Var& a, const Var& b) {
  return norm(add(a, attn(a, b)));
}

Var ffn_residual(const FeedForward& ffn, const LayerNormParams& norm,
                 const Var& x) {
  return norm(add(x, ffn(x)));
}

}  // namespace cstrack
