// src/encoder.cpp

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

#include "adaptasr/encoder.hpp"

#include <cmath>

namespace adaptasr::encoder {

void EncoderConfig::validate() const {
  if (input_dim < 1) throw ConfigError("encoder: input_dim must be >= 1");
  if (n_blocks < 1) throw ConfigError("encoder: n_blocks must be >= 1");
  if (model_dim < 1 || n_heads < 1 || model_dim % n_heads != 0) {
    throw ConfigError(cat("encoder: model_dim ", model_dim,
                          " must be divisible by n_heads ", n_heads));
  }
  if (left_context < 0 || right_context < 0 || conv_right < 0) {
    throw ConfigError("encoder: negative context");
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ConfigError("encoder: conv_kernel must be odd and >= 1");
  }
  if (conv_right >= conv_kernel) {
    throw ConfigError("encoder: conv_right must be < conv_kernel");
  }
  if (ff_expansion < 1) throw ConfigError("encoder: ff_expansion must be >= 1");
}

EncoderConfig EncoderConfig::full_size(int input_dim) {
  EncoderConfig c;
  c.input_dim = input_dim;
  c.n_blocks = 17;
  c.model_dim = 512;
  c.n_heads = 8;
  c.left_context = 65;
  c.right_context = 0;
  c.conv_kernel = 15;
  c.conv_right = 0;
  return c;
}

ConformerEncoder::ConformerEncoder(ParamMap& params, const std::string& prefix,
                                   const EncoderConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const int64_t d = config_.model_dim;
  const int64_t ff = static_cast<int64_t>(config_.ff_expansion) * d;
  input_proj_ = Linear(params, prefix + ".input_proj", config_.input_dim, d, rng);
  blocks_.reserve(static_cast<size_t>(config_.n_blocks));
  for (int i = 0; i < config_.n_blocks; ++i) {
    const std::string bp = cat(prefix, ".block", i);
    Block block;
    block.ff1_ln = LayerNorm(params, bp + ".ff1.ln", d);
    block.ff1_a = Linear(params, bp + ".ff1.a", d, ff, rng);
    block.ff1_b = Linear(params, bp + ".ff1.b", ff, d, rng);
    block.att_ln = LayerNorm(params, bp + ".att.ln", d);
    block.wq = Linear(params, bp + ".att.q", d, d, rng);
    block.wk = Linear(params, bp + ".att.k", d, d, rng);
    block.wv = Linear(params, bp + ".att.v", d, d, rng);
    block.wo = Linear(params, bp + ".att.o", d, d, rng);
    block.conv_ln = LayerNorm(params, bp + ".conv.ln", d);
    block.conv_pw1 = Linear(params, bp + ".conv.pw1", d, 2 * d, rng);
    block.conv_dw = params.create(
        bp + ".conv.dw",
        Tensor::randn({config_.conv_kernel, d}, rng,
                      1.0 / std::sqrt(static_cast<double>(config_.conv_kernel)),
                      true));
    block.conv_mid_ln = LayerNorm(params, bp + ".conv.mid_ln", d);
    block.conv_pw2 = Linear(params, bp + ".conv.pw2", d, d, rng);
    block.ff2_ln = LayerNorm(params, bp + ".ff2.ln", d);
    block.ff2_a = Linear(params, bp + ".ff2.a", d, ff, rng);
    block.ff2_b = Linear(params, bp + ".ff2.b", ff, d, rng);
    blocks_.push_back(std::move(block));
  }
  final_ln_ = LayerNorm(params, prefix + ".final_ln", d);
}

Tensor ConformerEncoder::attention(const Block& block, const Tensor& x) const {
  const int64_t T = x.dim(0);
  const int64_t d = config_.model_dim;
  const int64_t hd = d / config_.n_heads;

  Tensor xl = block.att_ln(x);
  Tensor q = block.wq(xl);
  Tensor k = block.wk(xl);
  Tensor v = block.wv(xl);

  // Window mask: row t may attend to [t - left_context, t + right_context].
  std::vector<double> mask(static_cast<size_t>(T * T), 0.0);
  for (int64_t t = 0; t < T; ++t) {
    const int64_t lo = std::max<int64_t>(0, t - config_.left_context);
    const int64_t hi = std::min<int64_t>(T - 1, t + config_.right_context);
    for (int64_t s = lo; s <= hi; ++s) {
      mask[static_cast<size_t>(t * T + s)] = 1.0;
    }
  }
  const Tensor mask_t = Tensor::from_vector({T, T}, std::move(mask));

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(config_.n_heads));
  for (int h = 0; h < config_.n_heads; ++h) {
    Tensor qh = ops::narrow(q, 1, h * hd, hd);
    Tensor kh = ops::narrow(k, 1, h * hd, hd);
    Tensor vh = ops::narrow(v, 1, h * hd, hd);
    Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    Tensor att = ops::masked_softmax_lastdim(scores, mask_t);
    heads.push_back(ops::matmul(att, vh));
  }
  Tensor ctx = config_.n_heads == 1 ? heads[0] : ops::concat(heads, 1);
  return block.wo(ctx);
}

Tensor ConformerEncoder::convolution(const Block& block, const Tensor& x,
                                     int block_index) const {
  const int64_t d = config_.model_dim;
  Tensor xl = block.conv_ln(x);
  Tensor a = block.conv_pw1(xl);
  Tensor glu = ops::mul(ops::narrow(a, 1, 0, d),
                        ops::sigmoid(ops::narrow(a, 1, d, d)));
  Tensor c = ops::conv1d_depthwise(glu, block.conv_dw,
                                   config_.conv_kernel - 1 - config_.conv_right,
                                   config_.conv_right);
  c = block.conv_mid_ln(c);
  c = ops::swish(c);
  Tensor out = block.conv_pw2(c);
  if (!all_finite(out.values())) {
    throw ContractError(cat("encoder: non-finite activations in block ", block_index));
  }
  return out;
}

EncoderOutput ConformerEncoder::forward(const Tensor& features,
                                        bool keep_block_outputs) const {
  require(features.rank() == 2,
          cat("encoder: expects [T x input_dim], got ", shape_str(features.shape())));
  require(features.dim(1) == config_.input_dim,
          cat("encoder: input width ", features.dim(1), " != configured ",
              config_.input_dim));
  EncoderOutput out;
  Tensor x = input_proj_(features);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const Block& block = blocks_[i];
    // Macaron sandwich: 0.5*FF, attention, conv, 0.5*FF, all residual.
    x = ops::add(x, ops::scale(block.ff1_b(ops::swish(block.ff1_a(block.ff1_ln(x)))), 0.5));
    x = ops::add(x, attention(block, x));
    x = ops::add(x, convolution(block, x, static_cast<int>(i)));
    x = ops::add(x, ops::scale(block.ff2_b(ops::swish(block.ff2_a(block.ff2_ln(x)))), 0.5));
    if (keep_block_outputs) out.block_outputs.push_back(x);
  }
  out.encodings = final_ln_(x);
  return out;
}

}  // namespace adaptasr::encoder
