// src/tensor.cpp

// Copyright 2026  adapt-asr authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "adaptasr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace adaptasr {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return from_vector(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), 0.0),
                     requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return from_vector(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), value),
                     requires_grad);
}

Tensor Tensor::from_vector(const Shape& shape, std::vector<double> values,
                           bool requires_grad) {
  for (int64_t d : shape) {
    require(d >= 0, cat("tensor: negative dimension in ", shape_str(shape)));
  }
  require(shape_numel(shape) == static_cast<int64_t>(values.size()),
          cat("tensor: shape ", shape_str(shape), " does not match ",
              values.size(), " values"));
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = shape;
  t.node_->data = std::move(values);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_vector({1}, {value}, requires_grad);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev,
                     bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return from_vector(shape, std::move(v), requires_grad);
}

Tensor Tensor::xavier(int64_t fan_in, int64_t fan_out, Rng& rng,
                      bool requires_grad) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(static_cast<size_t>(fan_in * fan_out));
  for (double& x : v) x = (2.0 * rng.real01() - 1.0) * limit;
  return from_vector({fan_in, fan_out}, std::move(v), requires_grad);
}

double Tensor::value() const {
  require(node_ && node_->data.size() == 1,
          "Tensor::value: tensor is not scalar");
  return node_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  require(node_ != nullptr, "Tensor::at: undefined tensor");
  require(idx.size() == node_->shape.size(),
          cat("Tensor::at: rank mismatch for ", shape_str(node_->shape)));
  int64_t flat = 0;
  size_t axis = 0;
  for (int64_t i : idx) {
    require(i >= 0 && i < node_->shape[axis], "Tensor::at: index out of range");
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->data[static_cast<size_t>(flat)];
}

std::vector<double>& Tensor::grad() {
  require(node_ != nullptr, "Tensor::grad: undefined tensor");
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

const std::vector<double>& Tensor::grad_view() const {
  require(node_ && !node_->grad.empty(), "Tensor::grad_view: no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor detach(const Tensor& x) {
  return Tensor::from_vector(x.shape(), x.values(), /*requires_grad=*/false);
}

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Tape::Tape() {
  previous_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const char* op_name, std::vector<Tensor> inputs,
                  const Tensor& output, BackwardFn backward) {
  records_.push_back(Record{op_name, std::move(inputs), output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  require(!backward_done_, "Tape::backward: called twice without reset");
  require(loss.defined() && loss.numel() == 1,
          "Tape::backward: loss must be scalar");
  require(std::isfinite(loss.value()), "Tape::backward: loss is not finite");
  require(loss.requires_grad(),
          "Tape::backward: loss does not participate in this tape");
  backward_done_ = true;

  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // branch not reachable from loss
    it->backward(it->output, it->inputs);
  }
}

// ---------------------------------------------------------------------------
// Op helpers

namespace ops {
namespace {

void check_finite(const char* op, const Tensor& t) {
  if (!all_finite(t.values())) {
    throw ContractError(cat(op, ": non-finite input of shape ", shape_str(t.shape())));
  }
}

bool grad_wanted(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void record(const char* name, std::vector<Tensor> inputs, Tensor& out,
            Tape::BackwardFn fn) {
  out.set_requires_grad(true);
  Tape::active()->record(name, std::move(inputs), out, std::move(fn));
}

// True if small.shape is a trailing suffix of big.shape.
bool is_suffix_shape(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return false;
  for (size_t i = 0; i < small.size(); ++i) {
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
  }
  return true;
}

enum class EwKind { Add, Sub, Mul };

Tensor elementwise(const char* name, EwKind kind, const Tensor& a,
                   const Tensor& b) {
  check_finite(name, a);
  check_finite(name, b);
  const bool same = a.shape() == b.shape();
  const bool bcast = !same && is_suffix_shape(a.shape(), b.shape());
  if (!same && !bcast) {
    throw ContractError(cat(name, ": shape mismatch ", shape_str(a.shape()),
                            " vs ", shape_str(b.shape())));
  }
  const int64_t n = a.numel();
  const int64_t bn = b.numel();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double x = av[static_cast<size_t>(i)];
    const double y = bv[static_cast<size_t>(i % bn)];
    out[static_cast<size_t>(i)] =
        kind == EwKind::Add ? x + y : (kind == EwKind::Sub ? x - y : x * y);
  }
  Tensor result = Tensor::from_vector(a.shape(), std::move(out));
  if (grad_wanted({&a, &b})) {
    record(name, {a, b}, result,
           [kind, n, bn](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             Tensor& ta = ins[0];
             Tensor& tb = ins[1];
             if (ta.requires_grad()) {
               auto& ga = ta.grad();
               const auto& bv2 = tb.values();
               for (int64_t i = 0; i < n; ++i) {
                 const double gi = g[static_cast<size_t>(i)];
                 ga[static_cast<size_t>(i)] +=
                     kind == EwKind::Mul ? gi * bv2[static_cast<size_t>(i % bn)] : gi;
               }
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               const auto& av2 = ta.values();
               for (int64_t i = 0; i < n; ++i) {
                 const double gi = g[static_cast<size_t>(i)];
                 double contrib = gi;
                 if (kind == EwKind::Sub) contrib = -gi;
                 if (kind == EwKind::Mul) contrib = gi * av2[static_cast<size_t>(i)];
                 gb[static_cast<size_t>(i % bn)] += contrib;
               }
             }
           });
  }
  return result;
}

Tensor unary(const char* name, const Tensor& x,
             const std::function<double(double)>& f,
             const std::function<double(double, double)>& dfdx_from_x_y) {
  check_finite(name, x);
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Tensor result = Tensor::from_vector(x.shape(), std::move(out));
  if (grad_wanted({&x})) {
    record(name, {x}, result,
           [dfdx_from_x_y](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             const auto& yv = out_t.values();
             const auto& xv2 = ins[0].values();
             auto& gx = ins[0].grad();
             for (size_t i = 0; i < gx.size(); ++i) {
               gx[i] += g[i] * dfdx_from_x_y(xv2[i], yv[i]);
             }
           });
  }
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Arithmetic

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise("add", EwKind::Add, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise("sub", EwKind::Sub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise("mul", EwKind::Mul, a, b);
}

Tensor scale(const Tensor& a, double c) {
  require(std::isfinite(c), "scale: factor not finite");
  return unary("scale", a, [c](double x) { return c * x; },
               [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  require(std::isfinite(c), "add_scalar: addend not finite");
  return unary("add_scalar", a, [c](double x) { return x + c; },
               [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_finite("matmul", a);
  check_finite("matmul", b);
  require(a.rank() == 2 && b.rank() == 2,
          cat("matmul: expects 2-D operands, got ", shape_str(a.shape()), " and ",
              shape_str(b.shape())));
  require(a.dim(1) == b.dim(0),
          cat("matmul: inner dimensions differ: ", shape_str(a.shape()), " vs ",
              shape_str(b.shape())));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double aip = av[static_cast<size_t>(i * k + p)];
      if (aip == 0.0) continue;
      const double* brow = &bv[static_cast<size_t>(p * n)];
      double* orow = &out[static_cast<size_t>(i * n)];
      for (int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Tensor result = Tensor::from_vector({m, n}, std::move(out));
  if (grad_wanted({&a, &b})) {
    record("matmul", {a, b}, result,
           [m, k, n](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             Tensor& ta = ins[0];
             Tensor& tb = ins[1];
             if (ta.requires_grad()) {
               auto& ga = ta.grad();
               const auto& bv2 = tb.values();
               // dA = dY * B^T
               for (int64_t i = 0; i < m; ++i) {
                 for (int64_t j = 0; j < n; ++j) {
                   const double gij = g[static_cast<size_t>(i * n + j)];
                   if (gij == 0.0) continue;
                   for (int64_t p = 0; p < k; ++p) {
                     ga[static_cast<size_t>(i * k + p)] +=
                         gij * bv2[static_cast<size_t>(p * n + j)];
                   }
                 }
               }
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               const auto& av2 = ta.values();
               // dB = A^T * dY
               for (int64_t i = 0; i < m; ++i) {
                 for (int64_t p = 0; p < k; ++p) {
                   const double aip = av2[static_cast<size_t>(i * k + p)];
                   if (aip == 0.0) continue;
                   const double* grow = &g[static_cast<size_t>(i * n)];
                   double* brow = &gb[static_cast<size_t>(p * n)];
                   for (int64_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
                 }
               }
             }
           });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  check_finite("transpose", a);
  require(a.rank() == 2, cat("transpose: expects 2-D, got ", shape_str(a.shape())));
  const int64_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n));
  const auto& av = a.values();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      out[static_cast<size_t>(j * m + i)] = av[static_cast<size_t>(i * n + j)];
    }
  }
  Tensor result = Tensor::from_vector({n, m}, std::move(out));
  if (grad_wanted({&a})) {
    record("transpose", {a}, result,
           [m, n](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             auto& ga = ins[0].grad();
             for (int64_t i = 0; i < m; ++i) {
               for (int64_t j = 0; j < n; ++j) {
                 ga[static_cast<size_t>(i * n + j)] += g[static_cast<size_t>(j * m + i)];
               }
             }
           });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Softmax family

namespace {

// Shared forward for (masked) softmax / log-softmax over the last dimension.
// mask == nullptr means all entries are live.
Tensor softmax_impl(const char* name, const Tensor& x, const Tensor* mask,
                    bool log_space) {
  check_finite(name, x);
  require(x.rank() >= 1, cat(name, ": rank-0 input"));
  if (mask != nullptr) {
    require(mask->shape() == x.shape(),
            cat(name, ": mask shape ", shape_str(mask->shape()),
                " does not match input ", shape_str(x.shape())));
  }
  const int64_t d = x.dim(x.rank() - 1);
  const int64_t rows = x.numel() / d;
  const auto& xv = x.values();
  std::vector<double> out(xv.size(), 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = &xv[static_cast<size_t>(r * d)];
    const double* mrow =
        mask ? &mask->values()[static_cast<size_t>(r * d)] : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < d; ++j) {
      if (mrow && mrow[j] == 0.0) continue;
      mx = std::max(mx, row[j]);
    }
    require(std::isfinite(mx), cat(name, ": row with empty mask"));
    double z = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      if (mrow && mrow[j] == 0.0) continue;
      z += std::exp(row[j] - mx);
    }
    const double logz = std::log(z) + mx;
    double* orow = &out[static_cast<size_t>(r * d)];
    for (int64_t j = 0; j < d; ++j) {
      if (mrow && mrow[j] == 0.0) {
        orow[j] = log_space ? -std::numeric_limits<double>::infinity() : 0.0;
      } else {
        orow[j] = log_space ? row[j] - logz : std::exp(row[j] - logz);
      }
    }
  }
  require(!log_space || mask == nullptr,
          cat(name, ": masked log-softmax unsupported"));
  Tensor result = Tensor::from_vector(x.shape(), std::move(out));
  if (grad_wanted({&x})) {
    if (log_space) {
      record(name, {x}, result,
             [d, rows](const Tensor& out_t, std::vector<Tensor>& ins) {
               const auto& g = out_t.grad_view();
               const auto& yv = out_t.values();
               auto& gx = ins[0].grad();
               for (int64_t r = 0; r < rows; ++r) {
                 const size_t base = static_cast<size_t>(r * d);
                 double gsum = 0.0;
                 for (int64_t j = 0; j < d; ++j) gsum += g[base + static_cast<size_t>(j)];
                 for (int64_t j = 0; j < d; ++j) {
                   const size_t k = base + static_cast<size_t>(j);
                   gx[k] += g[k] - std::exp(yv[k]) * gsum;
                 }
               }
             });
    } else {
      record(name, {x}, result,
             [d, rows](const Tensor& out_t, std::vector<Tensor>& ins) {
               const auto& g = out_t.grad_view();
               const auto& s = out_t.values();
               auto& gx = ins[0].grad();
               for (int64_t r = 0; r < rows; ++r) {
                 const size_t base = static_cast<size_t>(r * d);
                 double dot = 0.0;
                 for (int64_t j = 0; j < d; ++j) {
                   const size_t k = base + static_cast<size_t>(j);
                   dot += g[k] * s[k];
                 }
                 for (int64_t j = 0; j < d; ++j) {
                   const size_t k = base + static_cast<size_t>(j);
                   gx[k] += s[k] * (g[k] - dot);
                 }
               }
             });
    }
  }
  return result;
}

}  // namespace

Tensor softmax_lastdim(const Tensor& x) {
  return softmax_impl("softmax_lastdim", x, nullptr, false);
}

Tensor masked_softmax_lastdim(const Tensor& x, const Tensor& mask) {
  return softmax_impl("masked_softmax_lastdim", x, &mask, false);
}

Tensor log_softmax_lastdim(const Tensor& x) {
  return softmax_impl("log_softmax_lastdim", x, nullptr, true);
}

// ---------------------------------------------------------------------------
// Normalization

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  check_finite("layer_norm", x);
  check_finite("layer_norm", gamma);
  check_finite("layer_norm", beta);
  require(x.rank() >= 1, "layer_norm: rank-0 input");
  const int64_t d = x.dim(x.rank() - 1);
  require(gamma.shape() == Shape{d} && beta.shape() == Shape{d},
          cat("layer_norm: gamma/beta must be [", d, "], got ",
              shape_str(gamma.shape()), " and ", shape_str(beta.shape())));
  const int64_t rows = x.numel() / d;
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<double> out(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r * d);
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += xv[base + static_cast<size_t>(j)];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = xv[base + static_cast<size_t>(j)] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = istd;
    for (int64_t j = 0; j < d; ++j) {
      const size_t k = base + static_cast<size_t>(j);
      xhat[k] = (xv[k] - mean) * istd;
      out[k] = gv[static_cast<size_t>(j)] * xhat[k] + bv[static_cast<size_t>(j)];
    }
  }
  Tensor result = Tensor::from_vector(x.shape(), std::move(out));
  if (grad_wanted({&x, &gamma, &beta})) {
    record("layer_norm", {x, gamma, beta}, result,
           [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
               const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             Tensor& tx = ins[0];
             Tensor& tg = ins[1];
             Tensor& tb = ins[2];
             const auto& gv2 = tg.values();
             for (int64_t r = 0; r < rows; ++r) {
               const size_t base = static_cast<size_t>(r * d);
               if (tg.requires_grad()) {
                 auto& gg = tg.grad();
                 for (int64_t j = 0; j < d; ++j) {
                   const size_t k = base + static_cast<size_t>(j);
                   gg[static_cast<size_t>(j)] += g[k] * xhat[k];
                 }
               }
               if (tb.requires_grad()) {
                 auto& gb = tb.grad();
                 for (int64_t j = 0; j < d; ++j) {
                   gb[static_cast<size_t>(j)] += g[base + static_cast<size_t>(j)];
                 }
               }
               if (tx.requires_grad()) {
                 auto& gx = tx.grad();
                 // dl/dxhat
                 double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                 for (int64_t j = 0; j < d; ++j) {
                   const size_t k = base + static_cast<size_t>(j);
                   const double dxh = g[k] * gv2[static_cast<size_t>(j)];
                   sum_dxh += dxh;
                   sum_dxh_xh += dxh * xhat[k];
                 }
                 const double istd = inv_std[static_cast<size_t>(r)];
                 const double nd = static_cast<double>(d);
                 for (int64_t j = 0; j < d; ++j) {
                   const size_t k = base + static_cast<size_t>(j);
                   const double dxh = g[k] * gv2[static_cast<size_t>(j)];
                   gx[k] += istd * (dxh - sum_dxh / nd - xhat[k] * sum_dxh_xh / nd);
                 }
               }
             }
           });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Convolution

Tensor conv1d_depthwise(const Tensor& x, const Tensor& kernel, int left,
                        int right) {
  check_finite("conv1d_depthwise", x);
  check_finite("conv1d_depthwise", kernel);
  require(x.rank() == 2, cat("conv1d_depthwise: input must be [T x C], got ",
                             shape_str(x.shape())));
  require(kernel.rank() == 2, cat("conv1d_depthwise: kernel must be [K x C], got ",
                                  shape_str(kernel.shape())));
  require(left >= 0 && right >= 0, "conv1d_depthwise: negative context");
  const int64_t T = x.dim(0), C = x.dim(1), K = kernel.dim(0);
  require(K == left + right + 1,
          cat("conv1d_depthwise: kernel size ", K, " != left+right+1 = ",
              left + right + 1));
  require(kernel.dim(1) == C,
          cat("conv1d_depthwise: channel mismatch ", shape_str(x.shape()), " vs ",
              shape_str(kernel.shape())));
  const auto& xv = x.values();
  const auto& wv = kernel.values();
  std::vector<double> out(static_cast<size_t>(T * C), 0.0);
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t k = 0; k < K; ++k) {
      const int64_t src = t + (k - left);
      if (src < 0 || src >= T) continue;
      const double* xrow = &xv[static_cast<size_t>(src * C)];
      const double* wrow = &wv[static_cast<size_t>(k * C)];
      double* orow = &out[static_cast<size_t>(t * C)];
      for (int64_t c = 0; c < C; ++c) orow[c] += xrow[c] * wrow[c];
    }
  }
  Tensor result = Tensor::from_vector({T, C}, std::move(out));
  if (grad_wanted({&x, &kernel})) {
    record("conv1d_depthwise", {x, kernel}, result,
           [T, C, K, left](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             Tensor& tx = ins[0];
             Tensor& tw = ins[1];
             const auto& xv2 = tx.values();
             const auto& wv2 = tw.values();
             for (int64_t t = 0; t < T; ++t) {
               for (int64_t k = 0; k < K; ++k) {
                 const int64_t src = t + (k - left);
                 if (src < 0 || src >= T) continue;
                 const double* grow = &g[static_cast<size_t>(t * C)];
                 if (tx.requires_grad()) {
                   auto& gx = tx.grad();
                   const double* wrow = &wv2[static_cast<size_t>(k * C)];
                   double* gxrow = &gx[static_cast<size_t>(src * C)];
                   for (int64_t c = 0; c < C; ++c) gxrow[c] += grow[c] * wrow[c];
                 }
                 if (tw.requires_grad()) {
                   auto& gw = tw.grad();
                   const double* xrow = &xv2[static_cast<size_t>(src * C)];
                   double* gwrow = &gw[static_cast<size_t>(k * C)];
                   for (int64_t c = 0; c < C; ++c) gwrow[c] += grow[c] * xrow[c];
                 }
               }
             }
           });
  }
  return result;
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel) {
  return conv1d_depthwise(x, kernel, static_cast<int>(kernel.dim(0)) - 1, 0);
}

// ---------------------------------------------------------------------------
// Activations

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475;
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return unary(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
               v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

Tensor swish(const Tensor& x) {
  return unary(
      "swish", x,
      [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

// ---------------------------------------------------------------------------
// Indexing / structure

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& rows) {
  check_finite("gather_rows", x);
  require(x.rank() == 2, cat("gather_rows: expects 2-D, got ", shape_str(x.shape())));
  const int64_t n = x.dim(0), d = x.dim(1);
  const auto& xv = x.values();
  std::vector<double> out(rows.size() * static_cast<size_t>(d));
  for (size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < n,
            cat("gather_rows: row ", rows[i], " out of range [0,", n, ")"));
    std::copy_n(&xv[static_cast<size_t>(rows[i] * d)], d, &out[i * static_cast<size_t>(d)]);
  }
  Tensor result =
      Tensor::from_vector({static_cast<int64_t>(rows.size()), d}, std::move(out));
  if (grad_wanted({&x})) {
    record("gather_rows", {x}, result,
           [rows, d](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             auto& gx = ins[0].grad();
             for (size_t i = 0; i < rows.size(); ++i) {
               const double* grow = &g[i * static_cast<size_t>(d)];
               double* gxrow = &gx[static_cast<size_t>(rows[i] * d)];
               for (int64_t c = 0; c < d; ++c) gxrow[c] += grow[c];
             }
           });
  }
  return result;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  std::vector<int64_t> rows(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) rows[i] = ids[i];
  return gather_rows(table, rows);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  const int rank = parts[0].rank();
  require(axis >= 0 && axis < rank, cat("concat: bad axis ", axis));
  int64_t cat_dim = 0;
  for (const Tensor& p : parts) {
    check_finite("concat", p);
    require(p.rank() == rank, "concat: rank mismatch");
    for (int a = 0; a < rank; ++a) {
      if (a == axis) continue;
      require(p.dim(a) == parts[0].dim(a),
              cat("concat: shape mismatch ", shape_str(p.shape()), " vs ",
                  shape_str(parts[0].shape())));
    }
    cat_dim += p.dim(axis);
  }
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<size_t>(axis)] = cat_dim;

  // outer = product of dims before axis; inner = product after.
  int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= out_shape[static_cast<size_t>(a)];
  for (int a = axis + 1; a < rank; ++a) inner *= out_shape[static_cast<size_t>(a)];

  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    const int64_t pd = p.dim(axis);
    const auto& pv = p.values();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(&pv[static_cast<size_t>(o * pd * inner)], pd * inner,
                  &out[static_cast<size_t>((o * cat_dim + offset) * inner)]);
    }
    offset += pd;
  }
  Tensor result = Tensor::from_vector(out_shape, std::move(out));

  bool wants = Tape::active() != nullptr;
  if (wants) {
    wants = false;
    for (const Tensor& p : parts) wants = wants || p.requires_grad();
  }
  if (wants) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    record("concat", std::move(inputs), result,
           [axis, outer, inner, cat_dim](const Tensor& out_t,
                                         std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             int64_t offset2 = 0;
             for (Tensor& p : ins) {
               const int64_t pd = p.dim(axis);
               if (p.requires_grad()) {
                 auto& gp = p.grad();
                 for (int64_t o = 0; o < outer; ++o) {
                   const double* src =
                       &g[static_cast<size_t>((o * cat_dim + offset2) * inner)];
                   double* dst = &gp[static_cast<size_t>(o * pd * inner)];
                   for (int64_t i = 0; i < pd * inner; ++i) dst[i] += src[i];
                 }
               }
               offset2 += pd;
             }
           });
  }
  return result;
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  return concat(std::vector<Tensor>{a, b}, axis);
}

Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t length) {
  check_finite("narrow", x);
  require(axis >= 0 && axis < x.rank(), cat("narrow: bad axis ", axis));
  require(start >= 0 && length >= 1 && start + length <= x.dim(axis),
          cat("narrow: range [", start, ",", start + length, ") out of dim ",
              x.dim(axis)));
  const int rank = x.rank();
  Shape out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = length;
  int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= x.dim(a);
  for (int a = axis + 1; a < rank; ++a) inner *= x.dim(a);
  const int64_t full = x.dim(axis);
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(&xv[static_cast<size_t>((o * full + start) * inner)],
                length * inner, &out[static_cast<size_t>(o * length * inner)]);
  }
  Tensor result = Tensor::from_vector(out_shape, std::move(out));
  if (grad_wanted({&x})) {
    record("narrow", {x}, result,
           [outer, inner, full, start, length](const Tensor& out_t,
                                               std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             auto& gx = ins[0].grad();
             for (int64_t o = 0; o < outer; ++o) {
               const double* src = &g[static_cast<size_t>(o * length * inner)];
               double* dst = &gx[static_cast<size_t>((o * full + start) * inner)];
               for (int64_t i = 0; i < length * inner; ++i) dst[i] += src[i];
             }
           });
  }
  return result;
}

Tensor mean(const Tensor& x) {
  check_finite("mean", x);
  require(x.numel() > 0, "mean: empty tensor");
  double s = 0.0;
  for (double v : x.values()) s += v;
  const double n = static_cast<double>(x.numel());
  Tensor result = Tensor::scalar(s / n);
  if (grad_wanted({&x})) {
    record("mean", {x}, result,
           [n](const Tensor& out_t, std::vector<Tensor>& ins) {
             const double g = out_t.grad_view()[0] / n;
             auto& gx = ins[0].grad();
             for (double& v : gx) v += g;
           });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  check_finite("sum", x);
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor result = Tensor::scalar(s);
  if (grad_wanted({&x})) {
    record("sum", {x}, result,
           [](const Tensor& out_t, std::vector<Tensor>& ins) {
             const double g = out_t.grad_view()[0];
             auto& gx = ins[0].grad();
             for (double& v : gx) v += g;
           });
  }
  return result;
}

Tensor reshape(const Tensor& x, const Shape& new_shape) {
  check_finite("reshape", x);
  require(shape_numel(new_shape) == x.numel(),
          cat("reshape: ", shape_str(x.shape()), " -> ", shape_str(new_shape),
              " changes element count"));
  Tensor result = Tensor::from_vector(new_shape, x.values());
  if (grad_wanted({&x})) {
    record("reshape", {x}, result,
           [](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             auto& gx = ins[0].grad();
             for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
           });
  }
  return result;
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
  check_finite("rowwise_dot", a);
  check_finite("rowwise_dot", b);
  require(a.rank() == 2 && a.shape() == b.shape(),
          cat("rowwise_dot: shape mismatch ", shape_str(a.shape()), " vs ",
              shape_str(b.shape())));
  const int64_t n = a.dim(0), d = a.dim(1);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      s += av[static_cast<size_t>(i * d + j)] * bv[static_cast<size_t>(i * d + j)];
    }
    out[static_cast<size_t>(i)] = s;
  }
  Tensor result = Tensor::from_vector({n}, std::move(out));
  if (grad_wanted({&a, &b})) {
    record("rowwise_dot", {a, b}, result,
           [n, d](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             Tensor& ta = ins[0];
             Tensor& tb = ins[1];
             for (int64_t i = 0; i < n; ++i) {
               const double gi = g[static_cast<size_t>(i)];
               if (gi == 0.0) continue;
               if (ta.requires_grad()) {
                 auto& ga = ta.grad();
                 const auto& bv2 = tb.values();
                 for (int64_t j = 0; j < d; ++j) {
                   ga[static_cast<size_t>(i * d + j)] += gi * bv2[static_cast<size_t>(i * d + j)];
                 }
               }
               if (tb.requires_grad()) {
                 auto& gb = tb.grad();
                 const auto& av2 = ta.values();
                 for (int64_t j = 0; j < d; ++j) {
                   gb[static_cast<size_t>(i * d + j)] += gi * av2[static_cast<size_t>(i * d + j)];
                 }
               }
             }
           });
  }
  return result;
}

Tensor lattice_combine(const Tensor& enc, const Tensor& pred) {
  check_finite("lattice_combine", enc);
  check_finite("lattice_combine", pred);
  require(enc.rank() == 2 && pred.rank() == 2 && enc.dim(1) == pred.dim(1),
          cat("lattice_combine: incompatible shapes ", shape_str(enc.shape()),
              " and ", shape_str(pred.shape())));
  const int64_t T = enc.dim(0), U = pred.dim(0), d = enc.dim(1);
  const auto& ev = enc.values();
  const auto& pv = pred.values();
  std::vector<double> out(static_cast<size_t>(T * U * d));
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t u = 0; u < U; ++u) {
      const double* erow = &ev[static_cast<size_t>(t * d)];
      const double* prow = &pv[static_cast<size_t>(u * d)];
      double* orow = &out[static_cast<size_t>((t * U + u) * d)];
      for (int64_t j = 0; j < d; ++j) orow[j] = erow[j] + prow[j];
    }
  }
  Tensor result = Tensor::from_vector({T, U, d}, std::move(out));
  if (grad_wanted({&enc, &pred})) {
    record("lattice_combine", {enc, pred}, result,
           [T, U, d](const Tensor& out_t, std::vector<Tensor>& ins) {
             const auto& g = out_t.grad_view();
             Tensor& te = ins[0];
             Tensor& tp = ins[1];
             for (int64_t t = 0; t < T; ++t) {
               for (int64_t u = 0; u < U; ++u) {
                 const double* grow = &g[static_cast<size_t>((t * U + u) * d)];
                 if (te.requires_grad()) {
                   double* erow = &te.grad()[static_cast<size_t>(t * d)];
                   for (int64_t j = 0; j < d; ++j) erow[j] += grow[j];
                 }
                 if (tp.requires_grad()) {
                   double* prow = &tp.grad()[static_cast<size_t>(u * d)];
                   for (int64_t j = 0; j < d; ++j) prow[j] += grow[j];
                 }
               }
             }
           });
  }
  return result;
}

Tensor sigmoid_bce_mean(const Tensor& logits, const std::vector<double>& targets) {
  check_finite("sigmoid_bce_mean", logits);
  require(logits.rank() == 1, cat("sigmoid_bce_mean: expects 1-D logits, got ",
                                  shape_str(logits.shape())));
  require(static_cast<size_t>(logits.numel()) == targets.size(),
          cat("sigmoid_bce_mean: ", logits.numel(), " logits vs ",
              targets.size(), " targets"));
  const int64_t n = logits.numel();
  require(n > 0, "sigmoid_bce_mean: empty input");
  const auto& xv = logits.values();
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double x = xv[static_cast<size_t>(i)];
    const double c = targets[static_cast<size_t>(i)];
    // max(x,0) - c*x + log(1 + exp(-|x|))
    loss += std::max(x, 0.0) - c * x + std::log1p(std::exp(-std::abs(x)));
  }
  loss /= static_cast<double>(n);
  Tensor result = Tensor::scalar(loss);
  if (grad_wanted({&logits})) {
    record("sigmoid_bce_mean", {logits}, result,
           [targets, n](const Tensor& out_t, std::vector<Tensor>& ins) {
             const double g = out_t.grad_view()[0] / static_cast<double>(n);
             const auto& xv2 = ins[0].values();
             auto& gx = ins[0].grad();
             for (int64_t i = 0; i < n; ++i) {
               const double s = 1.0 / (1.0 + std::exp(-xv2[static_cast<size_t>(i)]));
               gx[static_cast<size_t>(i)] += g * (s - targets[static_cast<size_t>(i)]);
             }
           });
  }
  return result;
}

}  // namespace ops

// ---------------------------------------------------------------------------
// ParamMap

Tensor& ParamMap::create(const std::string& name, Tensor initial) {
  require(!index_.count(name), cat("ParamMap: duplicate parameter ", name));
  initial.set_requires_grad(true);
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(initial));
  return items_.back().second;
}

Tensor& ParamMap::get(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), cat("ParamMap: unknown parameter ", name));
  return items_[it->second].second;
}

const Tensor& ParamMap::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), cat("ParamMap: unknown parameter ", name));
  return items_[it->second].second;
}

bool ParamMap::has(const std::string& name) const { return index_.count(name) > 0; }

void ParamMap::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

int64_t ParamMap::total_parameters() const {
  int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

int ParamMap::copy_matching_from(const ParamMap& src) {
  int copied = 0;
  for (auto& [name, t] : items_) {
    if (!src.has(name)) continue;
    const Tensor& s = src.get(name);
    if (s.shape() != t.shape()) continue;
    t.values() = s.values();
    ++copied;
  }
  return copied;
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(ParamMap& params) {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& [name, p] : params.items()) {
    Tensor& param = params.get(name);
    if (!param.has_grad()) continue;  // no gradient this step
    const auto& g = param.grad_view();
    if (!all_finite(g)) {
      ++skipped_nonfinite_;
      continue;
    }
    Moments& mom = state_[name];
    if (mom.m.empty()) {
      mom.m.assign(g.size(), 0.0);
      mom.v.assign(g.size(), 0.0);
    }
    require(mom.m.size() == g.size(),
            cat("Adam: moment shape mismatch for ", name));
    auto& val = param.values();
    for (size_t i = 0; i < g.size(); ++i) {
      mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g[i];
      mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      val[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr char kCkptMagic[4] = {'A', 'D', 'C', 'K'};
constexpr uint32_t kCkptVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& is, const char* what) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw ParseError(cat("checkpoint: truncated reading ", what));
  return v;
}
uint64_t read_u64(std::istream& is, const char* what) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw ParseError(cat("checkpoint: truncated reading ", what));
  return v;
}

}  // namespace

Checkpoint Checkpoint::from_params(const ParamMap& params,
                                   const std::string& metadata_json) {
  Checkpoint ck;
  ck.metadata_json = metadata_json;
  for (const auto& [name, t] : params.items()) ck.entries.emplace_back(name, t);
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(cat("checkpoint: cannot open for write: ", path));
  os.write(kCkptMagic, 4);
  write_u32(os, kCkptVersion);
  write_u64(os, metadata_json.size());
  os.write(metadata_json.data(), static_cast<std::streamsize>(metadata_json.size()));
  write_u32(os, static_cast<uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.rank()));
    for (int a = 0; a < t.rank(); ++a) {
      const int64_t d = t.dim(a);
      os.write(reinterpret_cast<const char*>(&d), sizeof(d));
    }
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.values().size() * sizeof(double)));
  }
  if (!os) throw Error(cat("checkpoint: write failed: ", path));
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(cat("checkpoint: cannot open: ", path));
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0) {
    throw ParseError(cat("checkpoint: bad magic in ", path));
  }
  const uint32_t version = read_u32(is, "version");
  if (version != kCkptVersion) {
    throw ParseError(cat("checkpoint: unsupported version ", version, " in ", path));
  }
  Checkpoint ck;
  const uint64_t meta_len = read_u64(is, "metadata length");
  ck.metadata_json.resize(meta_len);
  is.read(ck.metadata_json.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw ParseError("checkpoint: truncated metadata");
  const uint32_t count = read_u32(is, "entry count");
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw ParseError("checkpoint: truncated name");
    const uint32_t rank = read_u32(is, "rank");
    Shape shape(rank);
    for (uint32_t a = 0; a < rank; ++a) {
      is.read(reinterpret_cast<char*>(&shape[a]), sizeof(int64_t));
      if (!is) throw ParseError("checkpoint: truncated shape");
      if (shape[a] < 0 || shape[a] > (1 << 28)) {
        throw ParseError(cat("checkpoint: implausible dimension ", shape[a]));
      }
    }
    std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw ParseError(cat("checkpoint: truncated data for ", name));
    ck.entries.emplace_back(name, Tensor::from_vector(shape, std::move(data)));
  }
  return ck;
}

int Checkpoint::restore_into(ParamMap& params) const {
  int copied = 0;
  for (const auto& [name, t] : entries) {
    if (!params.has(name)) continue;
    Tensor& dst = params.get(name);
    if (dst.shape() != t.shape()) continue;
    dst.values() = t.values();
    ++copied;
  }
  return copied;
}

}  // namespace adaptasr
