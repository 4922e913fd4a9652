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

#include "cstrack/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "cstrack/error.hpp"

namespace cstrack {
namespace {

void require_same_size(const Var& a, const Var& b, const char* op) {
  if (a.value().size() != b.value().size()) {
    throw DimensionError(std::string(op) + ": size mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

Node& input(Node& n, std::size_t i) { return *n.inputs[i]; }

// Elementwise unary op from value and derivative functors.
template <typename F, typename DF>
Var unary(const Var& x, F f, DF df, const char* op) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result(
      std::move(out), {x},
      [df](Node& n) {
        Node& a = input(n, 0);
        Tensor& g = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += n.grad[i] * df(a.value[i], n.value[i]);
      },
      op);
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tensor out = kernels::matmul(a.value(), b.value());
  return make_result(
      std::move(out), {a, b},
      [](Node& n) {
        Node& A = input(n, 0);
        Node& B = input(n, 1);
        if (A.requires_grad)
          kernels::add_inplace(A.grad_buffer(),
                               kernels::matmul_nt(n.grad, B.value));
        if (B.requires_grad)
          kernels::add_inplace(B.grad_buffer(),
                               kernels::matmul_tn(A.value, n.grad));
      },
      "matmul");
}

Var matmul_nt(const Var& a, const Var& b) {
  Tensor out = kernels::matmul_nt(a.value(), b.value());
  return make_result(
      std::move(out), {a, b},
      [](Node& n) {
        Node& A = input(n, 0);
        Node& B = input(n, 1);
        if (A.requires_grad)
          kernels::add_inplace(A.grad_buffer(),
                               kernels::matmul(n.grad, B.value));
        if (B.requires_grad)
          kernels::add_inplace(B.grad_buffer(),
                               kernels::matmul_tn(n.grad, A.value));
      },
      "matmul_nt");
}

Var transpose(const Var& a) {
  return make_result(
      kernels::transpose(a.value()), {a},
      [](Node& n) {
        kernels::add_inplace(input(n, 0).grad_buffer(),
                             kernels::transpose(n.grad));
      },
      "transpose");
}

Var add(const Var& a, const Var& b) {
  require_same_size(a, b, "add");
  Tensor out = a.value();
  kernels::add_inplace(out, b.value());
  return make_result(
      std::move(out), {a, b},
      [](Node& n) {
        for (std::size_t k = 0; k < 2; ++k) {
          Node& x = input(n, k);
          if (x.requires_grad) kernels::add_inplace(x.grad_buffer(), n.grad);
        }
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  require_same_size(a, b, "sub");
  Tensor out = a.value();
  kernels::add_inplace(out, b.value(), -1.0);
  return make_result(
      std::move(out), {a, b},
      [](Node& n) {
        Node& A = input(n, 0);
        Node& B = input(n, 1);
        if (A.requires_grad) kernels::add_inplace(A.grad_buffer(), n.grad);
        if (B.requires_grad)
          kernels::add_inplace(B.grad_buffer(), n.grad, -1.0);
      },
      "sub");
}

Var mul(const Var& a, const Var& b) {
  require_same_size(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(
      std::move(out), {a, b},
      [](Node& n) {
        Node& A = input(n, 0);
        Node& B = input(n, 1);
        if (A.requires_grad) {
          Tensor& g = A.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += n.grad[i] * B.value[i];
        }
        if (B.requires_grad) {
          Tensor& g = B.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += n.grad[i] * A.value[i];
        }
      },
      "mul");
}

Var div(const Var& a, const Var& b) {
  require_same_size(a, b, "div");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return make_result(
      std::move(out), {a, b},
      [](Node& n) {
        Node& A = input(n, 0);
        Node& B = input(n, 1);
        if (A.requires_grad) {
          Tensor& g = A.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += n.grad[i] / B.value[i];
        }
        if (B.requires_grad) {
          Tensor& g = B.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] -= n.grad[i] * n.value[i] / B.value[i];
        }
      },
      "div");
}

namespace {

Var select_extreme(const Var& a, const Var& b, bool take_max,
                   const char* op) {
  require_same_size(a, b, op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool pick_a = take_max ? av[i] >= bv[i] : av[i] <= bv[i];
    out[i] = pick_a ? av[i] : bv[i];
  }
  return make_result(
      std::move(out), {a, b},
      [take_max](Node& n) {
        Node& A = input(n, 0);
        Node& B = input(n, 1);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const bool pick_a = take_max ? A.value[i] >= B.value[i]
                                       : A.value[i] <= B.value[i];
          Node& dst = pick_a ? A : B;
          if (dst.requires_grad) dst.grad_buffer()[i] += n.grad[i];
        }
      },
      op);
}

}  // namespace

Var maximum(const Var& a, const Var& b) {
  return select_extreme(a, b, true, "maximum");
}

Var minimum(const Var& a, const Var& b) {
  return select_extreme(a, b, false, "minimum");
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return make_result(
      std::move(out), {a},
      [s](Node& n) {
        kernels::add_inplace(input(n, 0).grad_buffer(), n.grad, s);
      },
      "scale");
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
  return make_result(
      std::move(out), {a},
      [](Node& n) { kernels::add_inplace(input(n, 0).grad_buffer(), n.grad); },
      "add_scalar");
}

Var add_row_bias(const Var& x, const Var& bias) {
  const std::size_t d = x.cols();
  if (bias.value().size() != d) {
    throw DimensionError("add_row_bias: bias length " +
                         std::to_string(bias.value().size()) +
                         " vs width " + std::to_string(d));
  }
  Tensor out = x.value();
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] += bias.value()[c];
  return make_result(
      std::move(out), {x, bias},
      [d](Node& n) {
        Node& X = input(n, 0);
        Node& B = input(n, 1);
        if (X.requires_grad) kernels::add_inplace(X.grad_buffer(), n.grad);
        if (B.requires_grad) {
          Tensor& g = B.grad_buffer();
          const std::size_t rows = n.grad.size() / std::max<std::size_t>(d, 1);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) g[c] += n.grad[r * d + c];
        }
      },
      "add_row_bias");
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const std::size_t out_dim = weight.cols();
  if (bias.value().size() != out_dim) {
    throw DimensionError("linear: bias length mismatch");
  }
  Tensor out = kernels::matmul(x.value(), weight.value());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out_dim; ++c)
      out[r * out_dim + c] += bias.value()[c];
  return make_result(
      std::move(out), {x, weight, bias},
      [out_dim](Node& n) {
        Node& X = input(n, 0);
        Node& W = input(n, 1);
        Node& B = input(n, 2);
        if (X.requires_grad)
          kernels::add_inplace(X.grad_buffer(),
                               kernels::matmul_nt(n.grad, W.value));
        if (W.requires_grad)
          kernels::add_inplace(W.grad_buffer(),
                               kernels::matmul_tn(X.value, n.grad));
        if (B.requires_grad) {
          Tensor& g = B.grad_buffer();
          const std::size_t rows = n.grad.rows();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < out_dim; ++c)
              g[c] += n.grad[r * out_dim + c];
        }
      },
      "linear");
}

Var gelu(const Var& x) {
  constexpr double kC = 0.7978845608028654;  // √(2/π)
  constexpr double kA = 0.044715;
  return unary(
      x,
      [](double v) {
        return 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
      },
      [](double v, double) {
        const double t = std::tanh(kC * (v + kA * v * v * v));
        return 0.5 * (1.0 + t) +
               0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
      },
      "gelu");
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Var abs(const Var& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); },
      "abs");
}

Var square(const Var& x) {
  return unary(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; }, "square");
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return make_result(
      Tensor::scalar(total), {x},
      [](Node& n) {
        Tensor& g = input(n, 0).grad_buffer();
        const double s = n.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
      },
      "sum");
}

Var mean(const Var& x) {
  const std::size_t count = x.value().size();
  if (count == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(count));
}

Var softmax_rows(const Var& m) {
  Tensor out = kernels::softmax_rows(m.value());
  return make_result(
      std::move(out), {m},
      [](Node& n) {
        Tensor& g = input(n, 0).grad_buffer();
        const std::size_t cols = n.value.cols();
        for (std::size_t r = 0; r < n.value.rows(); ++r) {
          const double* p = n.value.data() + r * cols;
          const double* dy = n.grad.data() + r * cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += p[c] * dy[c];
          for (std::size_t c = 0; c < cols; ++c)
            g[r * cols + c] += p[c] * (dy[c] - dot);
        }
      },
      "softmax_rows");
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t rows = x.rows();
  const std::size_t d = x.cols();
  if (d == 0) throw DimensionError("layer_norm over zero-width rows");
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw DimensionError("layer_norm: gamma/beta length must equal width " +
                         std::to_string(d));
  }
  auto xhat = std::make_shared<Tensor>(Shape{rows, d});
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(Shape{rows, d});
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (row[c] - mu) * is;
      (*xhat)[r * d + c] = h;
      out[r * d + c] = h * gamma.value()[c] + beta.value()[c];
    }
  }
  return make_result(
      std::move(out), {x, gamma, beta},
      [xhat, inv_std, d](Node& n) {
        Node& X = input(n, 0);
        Node& G = input(n, 1);
        Node& B = input(n, 2);
        const std::size_t rows = n.grad.rows();
        if (G.requires_grad || B.requires_grad) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) {
              const double dy = n.grad[r * d + c];
              if (G.requires_grad) G.grad_buffer()[c] += dy * (*xhat)[r * d + c];
              if (B.requires_grad) B.grad_buffer()[c] += dy;
            }
        }
        if (!X.requires_grad) return;
        Tensor& gx = X.grad_buffer();
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            dxhat[c] = n.grad[r * d + c] * G.value[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * (*xhat)[r * d + c];
          }
          mean_d /= static_cast<double>(d);
          mean_dx /= static_cast<double>(d);
          for (std::size_t c = 0; c < d; ++c)
            gx[r * d + c] += (*inv_std)[r] *
                             (dxhat[c] - mean_d - (*xhat)[r * d + c] * mean_dx);
        }
      },
      "layer_norm");
}

Var scaled_attention(const Var& q, const Var& k, const Var& v,
                     std::size_t n_heads, std::vector<Tensor>* probabilities) {
  const std::size_t d = q.cols();
  if (k.cols() != d || v.cols() != d) {
    throw DimensionError("scaled_attention: Q/K/V widths differ (" +
                         std::to_string(d) + ", " + std::to_string(k.cols()) +
                         ", " + std::to_string(v.cols()) + ")");
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("scaled_attention: K and V row counts differ");
  }
  if (n_heads == 0 || d % n_heads != 0) {
    throw ConfigError("scaled_attention: width " + std::to_string(d) +
                      " not divisible by " + std::to_string(n_heads) +
                      " heads");
  }
  if (k.rows() == 0) throw DimensionError("scaled_attention: no keys");
  const std::size_t a = q.rows();
  const std::size_t b = k.rows();
  const std::size_t dh = d / n_heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();

  auto probs = std::make_shared<std::vector<Tensor>>();
  probs->reserve(n_heads);
  Tensor out(Shape{a, d});
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * dh;
    Tensor p(Shape{a, b});
    for (std::size_t i = 0; i < a; ++i) {
      double* prow = p.data() + i * b;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < b; ++j) {
        double dot = 0.0;
        for (std::size_t t = 0; t < dh; ++t)
          dot += Q[i * d + off + t] * K[j * d + off + t];
        prow[j] = dot * s;
        mx = std::max(mx, prow[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < b; ++j) {
        prow[j] = std::exp(prow[j] - mx);
        total += prow[j];
      }
      for (std::size_t j = 0; j < b; ++j) prow[j] /= total;
      double* orow = out.data() + i * d + off;
      for (std::size_t j = 0; j < b; ++j) {
        const double pj = prow[j];
        const double* vrow = V.data() + j * d + off;
        for (std::size_t t = 0; t < dh; ++t) orow[t] += pj * vrow[t];
      }
    }
    if (probabilities) probabilities->push_back(p);
    probs->push_back(std::move(p));
  }

  return make_result(
      std::move(out), {q, k, v},
      [probs, n_heads, dh, s](Node& n) {
        Node& QN = input(n, 0);
        Node& KN = input(n, 1);
        Node& VN = input(n, 2);
        const std::size_t d = n_heads * dh;
        const std::size_t a = QN.value.rows();
        const std::size_t b = KN.value.rows();
        std::vector<double> dp(b), ds(b);
        for (std::size_t h = 0; h < n_heads; ++h) {
          const std::size_t off = h * dh;
          const Tensor& p = (*probs)[h];
          for (std::size_t i = 0; i < a; ++i) {
            const double* go = n.grad.data() + i * d + off;
            const double* prow = p.data() + i * b;
            double dot = 0.0;
            for (std::size_t j = 0; j < b; ++j) {
              const double* vrow = VN.value.data() + j * d + off;
              double acc = 0.0;
              for (std::size_t t = 0; t < dh; ++t) acc += go[t] * vrow[t];
              dp[j] = acc;
              dot += acc * prow[j];
            }
            for (std::size_t j = 0; j < b; ++j)
              ds[j] = prow[j] * (dp[j] - dot) * s;
            if (VN.requires_grad) {
              Tensor& gv = VN.grad_buffer();
              for (std::size_t j = 0; j < b; ++j) {
                double* gvrow = gv.data() + j * d + off;
                for (std::size_t t = 0; t < dh; ++t) gvrow[t] += prow[j] * go[t];
              }
            }
            if (QN.requires_grad) {
              double* gq = QN.grad_buffer().data() + i * d + off;
              for (std::size_t j = 0; j < b; ++j) {
                const double* krow = KN.value.data() + j * d + off;
                for (std::size_t t = 0; t < dh; ++t) gq[t] += ds[j] * krow[t];
              }
            }
            if (KN.requires_grad) {
              Tensor& gk = KN.grad_buffer();
              const double* qrow = QN.value.data() + i * d + off;
              for (std::size_t j = 0; j < b; ++j) {
                double* gkrow = gk.data() + j * d + off;
                for (std::size_t t = 0; t < dh; ++t) gkrow[t] += ds[j] * qrow[t];
              }
            }
          }
        }
      },
      "scaled_attention");
}

Var concat_rows(std::span<const Var> parts) {
  std::vector<Tensor> values;
  std::vector<Var> inputs;
  values.reserve(parts.size());
  for (const Var& p : parts) {
    values.push_back(p.value());
    inputs.push_back(p);
  }
  Tensor out = kernels::concat_rows(values);
  return make_result(
      std::move(out), std::move(inputs),
      [](Node& n) {
        std::size_t offset = 0;
        for (NodePtr& in : n.inputs) {
          const std::size_t len = in->value.size();
          if (in->requires_grad) {
            Tensor& g = in->grad_buffer();
            for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[offset + i];
          }
          offset += len;
        }
      },
      "concat_rows");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t total = 0;
  std::vector<Var> inputs;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols row mismatch");
    total += p.cols();
    inputs.push_back(p);
  }
  Tensor out(Shape{rows, total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j)
        out[r * total + off + j] = p.value()[r * c + j];
    off += c;
  }
  return make_result(
      std::move(out), std::move(inputs),
      [rows, total](Node& n) {
        std::size_t off = 0;
        for (NodePtr& in : n.inputs) {
          const std::size_t c = in->value.cols();
          if (in->requires_grad) {
            Tensor& g = in->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < c; ++j)
                g[r * c + j] += n.grad[r * total + off + j];
          }
          off += c;
        }
      },
      "concat_cols");
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  Tensor out = kernels::slice_rows(x.value(), begin, end);
  const std::size_t d = x.cols();
  return make_result(
      std::move(out), {x},
      [begin, d](Node& n) {
        Tensor& g = input(n, 0).grad_buffer();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          g[begin * d + i] += n.grad[i];
      },
      "slice_rows");
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  const std::size_t rows = x.rows();
  const std::size_t d = x.cols();
  if (begin > end || end > d) throw DimensionError("slice_cols out of range");
  const std::size_t w = end - begin;
  Tensor out(Shape{rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j)
      out[r * w + j] = x.value()[r * d + begin + j];
  return make_result(
      std::move(out), {x},
      [rows, d, begin, w](Node& n) {
        Tensor& g = input(n, 0).grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < w; ++j)
            g[r * d + begin + j] += n.grad[r * w + j];
      },
      "slice_cols");
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.cols();
  Tensor out(Shape{rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(rows[i]) +
                           " out of range " + std::to_string(x.rows()));
    }
    std::copy_n(x.value().data() + rows[i] * d, d, out.data() + i * d);
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  return make_result(
      std::move(out), {x},
      [idx, d](Node& n) {
        Tensor& g = input(n, 0).grad_buffer();
        for (std::size_t i = 0; i < idx->size(); ++i)
          for (std::size_t k = 0; k < d; ++k)
            g[(*idx)[i] * d + k] += n.grad[i * d + k];
      },
      "gather_rows");
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(
      std::move(out), {x},
      [](Node& n) { kernels::add_inplace(input(n, 0).grad_buffer(), n.grad); },
      "reshape");
}

Var neighbours3x3(const Var& x, std::size_t grid_rows, std::size_t grid_cols) {
  const std::size_t n_tok = grid_rows * grid_cols;
  if (x.rows() != n_tok) {
    throw DimensionError("neighbours3x3: " + std::to_string(x.rows()) +
                         " tokens do not fill a " + std::to_string(grid_rows) +
                         "x" + std::to_string(grid_cols) + " grid");
  }
  const std::size_t c = x.cols();
  // Source token for each (position, tap); -1 marks zero padding.
  auto src = std::make_shared<std::vector<long>>(n_tok * 9, -1);
  for (std::size_t r = 0; r < grid_rows; ++r)
    for (std::size_t col = 0; col < grid_cols; ++col)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const long rr = static_cast<long>(r) + dy;
          const long cc = static_cast<long>(col) + dx;
          const std::size_t tap = static_cast<std::size_t>((dy + 1) * 3 + dx + 1);
          if (rr >= 0 && cc >= 0 && rr < static_cast<long>(grid_rows) &&
              cc < static_cast<long>(grid_cols))
            (*src)[(r * grid_cols + col) * 9 + tap] =
                rr * static_cast<long>(grid_cols) + cc;
        }
  Tensor out(Shape{n_tok, 9 * c});
  for (std::size_t p = 0; p < n_tok; ++p)
    for (std::size_t tap = 0; tap < 9; ++tap) {
      const long s = (*src)[p * 9 + tap];
      if (s < 0) continue;
      std::copy_n(x.value().data() + static_cast<std::size_t>(s) * c, c,
                  out.data() + p * 9 * c + tap * c);
    }
  return make_result(
      std::move(out), {x},
      [src, n_tok, c](Node& n) {
        Tensor& g = input(n, 0).grad_buffer();
        for (std::size_t p = 0; p < n_tok; ++p)
          for (std::size_t tap = 0; tap < 9; ++tap) {
            const long s = (*src)[p * 9 + tap];
            if (s < 0) continue;
            const double* gi = n.grad.data() + p * 9 * c + tap * c;
            double* go = g.data() + static_cast<std::size_t>(s) * c;
            for (std::size_t j = 0; j < c; ++j) go[j] += gi[j];
          }
      },
      "neighbours3x3");
}

Var focal_loss(const Var& logits, const Tensor& target, double alpha,
               double beta) {
  const Tensor& x = logits.value();
  if (x.size() != target.size()) {
    throw DimensionError("focal_loss: logits and target sizes differ");
  }
  std::size_t positives = 0;
  for (double t : target.values()) positives += (t == 1.0) ? 1 : 0;
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, positives));
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double log_p = -softplus(-x[i]);
    const double log_q = -softplus(x[i]);
    const double p = std::exp(log_p);
    const double q = std::exp(log_q);
    if (target[i] == 1.0) {
      total -= std::pow(q, alpha) * log_p;
    } else {
      total -= std::pow(1.0 - target[i], beta) * std::pow(p, alpha) * log_q;
    }
  }
  auto tgt = std::make_shared<Tensor>(target);
  return make_result(
      Tensor::scalar(total * norm), {logits},
      [tgt, alpha, beta, norm](Node& n) {
        Node& L = input(n, 0);
        Tensor& g = L.grad_buffer();
        const double up = n.grad[0] * norm;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double xi = L.value[i];
          const double log_p = -softplus(-xi);
          const double log_q = -softplus(xi);
          const double p = std::exp(log_p);
          const double q = std::exp(log_q);
          double d;
          if ((*tgt)[i] == 1.0) {
            d = std::pow(q, alpha) * (alpha * p * log_p - q);
          } else {
            const double w = std::pow(1.0 - (*tgt)[i], beta);
            d = w * std::pow(p, alpha) * (p - alpha * q * log_q);
          }
          g[i] += up * d;
        }
      },
      "focal_loss");
}

}  // namespace cstrack
