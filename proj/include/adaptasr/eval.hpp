// include/adaptasr/eval.hpp

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

// Token-level word error rate and the edit-distance alignment behind it.

#ifndef ADAPTASR_EVAL_HPP_
#define ADAPTASR_EVAL_HPP_

#include <cstdint>
#include <functional>
#include <vector>

namespace adaptasr::eval {

enum class EditOp { kMatch, kSubstitution, kInsertion, kDeletion };

// Minimal-cost alignment of hyp against ref with unit costs and a
// deterministic tie-break: match > substitution > insertion > deletion.
std::vector<EditOp> align_tokens(const std::vector<int>& hyp,
                                 const std::vector<int>& ref);

struct WerBreakdown {
  int64_t substitutions = 0;
  int64_t insertions = 0;
  int64_t deletions = 0;
  int64_t n_ref_tokens = 0;

  int64_t errors() const { return substitutions + insertions + deletions; }
  // (S+I+D)/N. An empty reference with a nonempty hypothesis counts the
  // insertions against a denominator of 1.
  double wer() const {
    if (n_ref_tokens == 0 && errors() == 0) return 0.0;
    return static_cast<double>(errors()) /
           static_cast<double>(n_ref_tokens > 0 ? n_ref_tokens : 1);
  }
  void accumulate(const WerBreakdown& other) {
    substitutions += other.substitutions;
    insertions += other.insertions;
    deletions += other.deletions;
    n_ref_tokens += other.n_ref_tokens;
  }
};

WerBreakdown wer(const std::vector<int>& hyp, const std::vector<int>& ref);

// Micro-averaged WER over a split: per-utterance error counts are summed
// before dividing by the total reference token count. The decoder callback
// maps an utterance index to its hypothesis.
WerBreakdown corpus_wer(
    const std::function<std::vector<int>(int64_t utt_index)>& decode,
    const std::function<const std::vector<int>&(int64_t utt_index)>& reference,
    const std::vector<int64_t>& utt_indices);

}  // namespace adaptasr::eval

#endif  // ADAPTASR_EVAL_HPP_
