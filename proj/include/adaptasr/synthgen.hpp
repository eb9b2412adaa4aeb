// include/adaptasr/synthgen.hpp

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

// Synthetic multi-domain corpus with a controllable source/target shift.
// Utterances are token sequences rendered as per-token prototype feature
// frames; the two domains differ in token priors and in utterance length,
// which manufactures the out-of-domain gap the adaptation recipes close.

#ifndef ADAPTASR_SYNTHGEN_HPP_
#define ADAPTASR_SYNTHGEN_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adaptasr/common.hpp"
#include "adaptasr/tensor.hpp"

namespace adaptasr::synthgen {

constexpr int kSourceDomain = 0;
constexpr int kTargetDomain = 1;

struct LenRange {
  int min_frames = 0;
  int max_frames = 0;
};

struct CorpusSpec {
  int vocab_size = 32;
  int feat_dim = 16;  // raw feature width before stacking
  LenRange source_len_range{20, 40};
  LenRange target_len_range{60, 120};
  // Categorical token distributions, one per domain; must have total
  // variation distance >= 0.3.
  std::vector<double> source_prior;
  std::vector<double> target_prior;
  double noise_sigma = 0.2;
  int n_source = 100;
  int n_target = 100;
  int n_eval_source = 40;
  int n_eval_target = 40;
  int stack = 4;
  int subsample = 3;
  int domain_onehot_size = 4;
  double target_label_fraction = 0.03;
  uint64_t seed = 1;

  // Skewed default priors: the given mass on the domain's own half of the
  // vocabulary, the remainder on the other half.
  static CorpusSpec with_default_priors(double own_half_mass = 0.9);

  int stacked_width() const { return feat_dim * stack; }
  int input_width() const { return stacked_width() + domain_onehot_size; }
  void validate() const;
  std::string to_json() const;
  static CorpusSpec from_json(const std::string& text);
};

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

enum class LabelKind { kHuman, kPseudo, kNone };

struct Utterance {
  Tensor features;           // [T x (stacked_width + domain_onehot)]
  std::vector<int> tokens;   // ground-truth or pseudo transcript
  int domain_index = 0;
  int domain_onehot_size = 4;
  LabelKind label_kind = LabelKind::kHuman;
  std::optional<double> confidence;  // present iff label_kind == kPseudo

  std::vector<double> domain_onehot() const {
    std::vector<double> v(static_cast<size_t>(domain_onehot_size), 0.0);
    v[static_cast<size_t>(domain_index)] = 1.0;
    return v;
  }
};

struct SplitManifest {
  std::vector<int64_t> md;            // all labeled training utterances
  std::vector<int64_t> md_src;        // source-domain training utterances
  std::vector<int64_t> md_3p;         // md_src + 3% of target, seeded sample
  std::vector<int64_t> mf_unlabeled;  // all target-domain training utterances
  std::vector<int64_t> eval_mf;       // held-out target
  std::vector<int64_t> eval_sf;       // held-out source

  std::string to_json() const;
  static SplitManifest from_json(const std::string& text);
};

struct Corpus {
  CorpusSpec spec;
  std::vector<Utterance> utterances;
  SplitManifest manifest;
};

// Deterministic seeded sample of `fraction` of the given ids (round to
// nearest count). Used for the 3% split and the label-fraction sweep.
std::vector<int64_t> sample_fraction(const std::vector<int64_t>& ids,
                                     double fraction, uint64_t seed);

// [T x F] -> [ceil(T/subsample) x (stack*F)]; output row i concatenates
// input rows [subsample*i .. subsample*i + stack), zero-padded at the tail.
Tensor stack_frames(const Tensor& features, int stack = 4, int subsample = 3);

Corpus generate(const CorpusSpec& spec);

void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus read_corpus(const std::string& dir);

}  // namespace adaptasr::synthgen

#endif  // ADAPTASR_SYNTHGEN_HPP_
