// include/adaptasr/transducer.hpp

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

// Transducer decoder stack: LSTM prediction network over previous non-blank
// labels, a joint network combining encoder and prediction features per
// lattice node, the exact log-space forward-backward loss, and greedy/beam
// decoding. Blank is always the last output index (vocab_size).

#ifndef ADAPTASR_TRANSDUCER_HPP_
#define ADAPTASR_TRANSDUCER_HPP_

#include <string>
#include <vector>

#include "adaptasr/layers.hpp"
#include "adaptasr/tensor.hpp"

namespace adaptasr::transducer {

struct PredictionNetConfig {
  int n_layers = 1;  // full-size reference: 2
  int hidden = 64;   // full-size reference: 2048
  int proj = 32;     // full-size reference: 640
  int embed = 32;
  void validate() const;
};

struct JointConfig {
  int joint_dim = 32;  // full-size reference: 640
  int vocab_size = 0;
  int blank_id() const { return vocab_size; }
  int n_outputs() const { return vocab_size + 1; }
  void validate() const;
};

struct DecodeConfig {
  int beam_size = 4;
  int max_symbols_per_frame = 4;  // decoding termination guard
};

// Negative log-likelihood of the target sequence under the transducer
// lattice: -log of the sum over all monotonic blank/label alignment paths.
// log_probs is [T x (U+1) x (V+1)], already normalized over the last dim.
// The alpha- and beta-side recursions must agree within 1e-9.
Tensor rnnt_nll(const Tensor& log_probs, const std::vector<int>& targets,
                int blank);

// Convenience: log-softmax over the last dim, then rnnt_nll.
Tensor rnnt_loss_from_logits(const Tensor& logits,
                             const std::vector<int>& targets, int blank);

struct TokenEmission {
  int frame = 0;
  int token = 0;
  double log_prob = 0.0;  // per-token log-probability at emission time
};

struct DecodeResult {
  std::vector<int> tokens;
  double log_prob = 0.0;
  std::vector<TokenEmission> emissions;
};

class Transducer {
 public:
  Transducer(ParamMap& params, const std::string& prefix,
             const PredictionNetConfig& pred_config,
             const JointConfig& joint_config, int enc_dim, Rng& rng);

  // Lattice log-probabilities for a target sequence: [T x (U+1) x (V+1)].
  Tensor lattice_log_probs(const Tensor& enc, const std::vector<int>& targets) const;
  // Scalar RNN-T loss for one utterance.
  Tensor loss(const Tensor& enc, const std::vector<int>& targets) const;

  DecodeResult greedy(const Tensor& enc, const DecodeConfig& config) const;
  // n-best sorted by descending total log-probability; identical label
  // sequences reached by different alignments are merged by log-sum-exp.
  // beam_size 1 delegates to greedy.
  std::vector<DecodeResult> beam(const Tensor& enc, const DecodeConfig& config) const;

  const JointConfig& joint_config() const { return joint_config_; }
  const PredictionNetConfig& pred_config() const { return pred_config_; }

 private:
  struct LstmLayer {
    Tensor w_ih;  // [in x 4h]
    Tensor w_hh;  // [h x 4h]
    Tensor bias;  // [4h]
  };
  struct PredState {
    std::vector<Tensor> h, c;  // per layer, [1 x hidden]
  };

  PredState initial_state() const;
  // One prediction-network step on the previous token; returns [1 x proj].
  std::pair<Tensor, PredState> pred_step(int prev_token, const PredState& state) const;
  // Outputs for [sos, targets...]: [(U+1) x proj].
  Tensor pred_forward(const std::vector<int>& targets) const;
  // Joint logits for a single lattice node: [1 x (V+1)].
  Tensor joint_step(const Tensor& enc_row, const Tensor& pred_row) const;

  PredictionNetConfig pred_config_;
  JointConfig joint_config_;
  Tensor embed_;  // [(V+1) x embed]; index V doubles as start-of-sequence
  std::vector<LstmLayer> lstm_;
  Linear pred_proj_;
  MlpHead enc_head_;   // encoder-side specialization MLP
  Linear pred_path_;   // prediction-side projection into the joint space
  Linear joint_out_;
};

}  // namespace adaptasr::transducer

#endif  // ADAPTASR_TRANSDUCER_HPP_
