// include/adaptasr/tensor.hpp

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

// Dense 64-bit tensors with reverse-mode differentiation on a dynamic tape.
// Everything is double precision: the test suites lean on tight
// finite-difference tolerances that float32 cannot meet.
//
// A Tensor is a cheap value-like handle onto a shared node (shape + data +
// optional grad). Ops never mutate their inputs; gradients accumulate on the
// node, so any handle sees them. A Tape is confined to one thread; the
// innermost live Tape on the current thread records ops whose inputs require
// gradients.

#ifndef ADAPTASR_TENSOR_HPP_
#define ADAPTASR_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "adaptasr/common.hpp"

namespace adaptasr {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value,
                     bool requires_grad = false);
  static Tensor from_vector(const Shape& shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);
  // Xavier-uniform init for a [fan_in x fan_out] weight matrix.
  static Tensor xavier(int64_t fan_in, int64_t fan_out, Rng& rng,
                       bool requires_grad = true);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
  int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  std::vector<double>& values() { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }

  // Scalar access; contract error if not a single-element tensor.
  double value() const;
  double at(std::initializer_list<int64_t> idx) const;

  // Gradient buffer, zero-initialized on first access.
  std::vector<double>& grad();
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<double>& grad_view() const;
  void zero_grad();

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const void* id() const { return node_.get(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until touched
  };
  std::shared_ptr<Node> node_;
};

// Fresh constant tensor with the same values and no tape participation.
Tensor detach(const Tensor& x);

// Define-by-run gradient tape. Constructing a Tape makes it the active
// recorder on this thread; destruction restores the previous one. backward()
// may be called exactly once per tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  using BackwardFn = std::function<void(const Tensor& out, std::vector<Tensor>& inputs)>;
  void record(const char* op_name, std::vector<Tensor> inputs,
              const Tensor& output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, populating
  // grad on every requires_grad tensor reachable from loss.
  void backward(const Tensor& loss);

  size_t num_ops() const { return records_.size(); }

 private:
  struct Record {
    const char* name;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Record> records_;
  bool backward_done_ = false;
  Tape* previous_ = nullptr;
};

namespace ops {

// Elementwise; `b` may also have a shape that is a trailing suffix of
// `a`'s (bias-style broadcast over leading batch dimensions).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m x k] * [k x n]
Tensor transpose(const Tensor& a);                // 2-D

Tensor softmax_lastdim(const Tensor& x);
// mask holds 0/1 constants, same shape as x; softmax is taken over mask==1
// entries only and is exactly 0 elsewhere. A row with an empty mask is a
// contract error.
Tensor masked_softmax_lastdim(const Tensor& x, const Tensor& mask);
Tensor log_softmax_lastdim(const Tensor& x);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Depthwise 1-D convolution over time (axis 0) with explicit left/right
// context; kernel is [K x C] with K == left + right + 1 and out-of-range
// frames treated as zero. right == 0 gives the causal variant.
Tensor conv1d_depthwise(const Tensor& x, const Tensor& kernel, int left,
                        int right);
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel);

Tensor gelu(const Tensor& x);
Tensor swish(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& rows);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t length);

Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, const Shape& new_shape);

// Row-wise dot product of two [N x d] matrices -> [N].
Tensor rowwise_dot(const Tensor& a, const Tensor& b);

// Outer sum: [T x j] + [U x j] -> [T x U x j].
Tensor lattice_combine(const Tensor& enc, const Tensor& pred);

// Mean binary cross entropy from logits, numerically stable. targets are
// 0/1 constants.
Tensor sigmoid_bce_mean(const Tensor& logits, const std::vector<double>& targets);

}  // namespace ops

// Named parameter tree with deterministic (insertion) order.
class ParamMap {
 public:
  Tensor& create(const std::string& name, Tensor initial);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }
  size_t size() const { return items_.size(); }
  void zero_grad();
  int64_t total_parameters() const;

  // Copies values from src for every name whose shape matches; returns the
  // number of parameters copied.
  int copy_matching_from(const ParamMap& src);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, size_t> index_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam. A parameter whose gradient contains a non-finite value is
// skipped for that step and counted in skipped_nonfinite().
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}
  void step(ParamMap& params);
  int64_t step_count() const { return step_count_; }
  int64_t skipped_nonfinite() const { return skipped_nonfinite_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamConfig config_;
  std::map<std::string, Moments> state_;
  int64_t step_count_ = 0;
  int64_t skipped_nonfinite_ = 0;
};

// Parameter checkpoint container: "ADCK" magic, format version, a JSON
// metadata blob, then name -> shape + raw little-endian f64 data.
struct Checkpoint {
  std::string metadata_json;  // free-form JSON document
  std::vector<std::pair<std::string, Tensor>> entries;

  static Checkpoint from_params(const ParamMap& params,
                                const std::string& metadata_json);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
  // Copies into params wherever name and shape match; returns count.
  int restore_into(ParamMap& params) const;
};

}  // namespace adaptasr

#endif  // ADAPTASR_TENSOR_HPP_
