// include/adaptasr/layers.hpp

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

// Small parameterized building blocks. Each layer registers its parameters
// under a dotted path prefix at construction and keeps shared handles, so
// optimizer updates through the ParamMap are visible here and vice versa.

#ifndef ADAPTASR_LAYERS_HPP_
#define ADAPTASR_LAYERS_HPP_

#include <string>

#include "adaptasr/tensor.hpp"

namespace adaptasr {

class Linear {
 public:
  Linear() = default;
  Linear(ParamMap& params, const std::string& prefix, int64_t in, int64_t out,
         Rng& rng)
      : w_(params.create(prefix + ".w", Tensor::xavier(in, out, rng))),
        b_(params.create(prefix + ".b", Tensor::zeros({out}, true))) {}

  Tensor operator()(const Tensor& x) const {
    return ops::add(ops::matmul(x, w_), b_);
  }

 private:
  Tensor w_, b_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamMap& params, const std::string& prefix, int64_t dim)
      : gamma_(params.create(prefix + ".g", Tensor::full({dim}, 1.0, true))),
        beta_(params.create(prefix + ".b", Tensor::zeros({dim}, true))) {}

  Tensor operator()(const Tensor& x) const {
    return ops::layer_norm(x, gamma_, beta_);
  }

 private:
  Tensor gamma_, beta_;
};

// Two-layer MLP with a swish nonlinearity in between; the specialization
// head used on top of the encoder for the transducer and the
// self-supervised objectives.
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(ParamMap& params, const std::string& prefix, int64_t in,
          int64_t hidden, int64_t out, Rng& rng)
      : l1_(params, prefix + ".l1", in, hidden, rng),
        l2_(params, prefix + ".l2", hidden, out, rng) {}

  Tensor operator()(const Tensor& x) const { return l2_(ops::swish(l1_(x))); }

 private:
  Linear l1_, l2_;
};

}  // namespace adaptasr

#endif  // ADAPTASR_LAYERS_HPP_
