// include/adaptasr/encoder.hpp

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

// Conformer audio encoder. The streaming (student) variant is strictly
// causal: windowed left-context attention and causal depthwise convolution.
// The teacher variant declares per-block attention and convolution right
// context; with n blocks the whole encoder can see at most
// n * (right_context + conv_right) frames ahead.

#ifndef ADAPTASR_ENCODER_HPP_
#define ADAPTASR_ENCODER_HPP_

#include <memory>
#include <string>
#include <vector>

#include "adaptasr/layers.hpp"
#include "adaptasr/tensor.hpp"

namespace adaptasr::encoder {

struct EncoderConfig {
  int input_dim = 68;   // stacked features + domain one-hot
  int n_blocks = 4;     // full-size reference: 17
  int model_dim = 64;   // full-size reference: 512
  int n_heads = 4;      // full-size reference: 8
  int left_context = 16;   // full-size reference: 65
  int right_context = 0;   // per-block attention lookahead; 0 = streaming
  int conv_kernel = 7;     // full-size reference: 15
  int conv_right = 0;      // per-block convolution lookahead; 0 = causal
  int ff_expansion = 4;

  bool causal() const { return right_context == 0 && conv_right == 0; }
  int effective_right_context() const {
    return n_blocks * (right_context + conv_right);
  }
  void validate() const;

  // The configuration at the dimensions this one was scaled down from;
  // constructible but far too large to train at desk scale.
  static EncoderConfig full_size(int input_dim);
};

struct EncoderOutput {
  Tensor encodings;                   // [T x model_dim]
  std::vector<Tensor> block_outputs;  // per-block, only when requested
};

class ConformerEncoder {
 public:
  ConformerEncoder(ParamMap& params, const std::string& prefix,
                   const EncoderConfig& config, Rng& rng);

  EncoderOutput forward(const Tensor& features,
                        bool keep_block_outputs = false) const;
  const EncoderConfig& config() const { return config_; }

 private:
  struct Block {
    LayerNorm ff1_ln, att_ln, conv_ln, conv_mid_ln, ff2_ln;
    Linear ff1_a, ff1_b, ff2_a, ff2_b;
    Linear wq, wk, wv, wo;
    Linear conv_pw1, conv_pw2;
    Tensor conv_dw;  // [K x model_dim]
  };

  Tensor attention(const Block& block, const Tensor& x) const;
  Tensor convolution(const Block& block, const Tensor& x, int block_index) const;

  EncoderConfig config_;
  Linear input_proj_;
  std::vector<Block> blocks_;
  LayerNorm final_ln_;
};

}  // namespace adaptasr::encoder

#endif  // ADAPTASR_ENCODER_HPP_
