// src/eval.cpp

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

#include "adaptasr/eval.hpp"

#include <algorithm>

#include "adaptasr/common.hpp"

namespace adaptasr::eval {

std::vector<EditOp> align_tokens(const std::vector<int>& hyp,
                                 const std::vector<int>& ref) {
  const size_t n = hyp.size();
  const size_t m = ref.size();
  // cost[i][j]: minimal edits aligning hyp[0..i) with ref[0..j).
  std::vector<std::vector<int32_t>> cost(n + 1, std::vector<int32_t>(m + 1, 0));
  std::vector<std::vector<EditOp>> back(n + 1, std::vector<EditOp>(m + 1, EditOp::kMatch));
  for (size_t i = 1; i <= n; ++i) {
    cost[i][0] = static_cast<int32_t>(i);
    back[i][0] = EditOp::kInsertion;
  }
  for (size_t j = 1; j <= m; ++j) {
    cost[0][j] = static_cast<int32_t>(j);
    back[0][j] = EditOp::kDeletion;
  }
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const bool is_match = hyp[i - 1] == ref[j - 1];
      const int32_t diag = cost[i - 1][j - 1] + (is_match ? 0 : 1);
      const int32_t ins = cost[i - 1][j] + 1;   // extra hypothesis token
      const int32_t del = cost[i][j - 1] + 1;   // missing reference token
      // Tie-break: match > substitution > insertion > deletion.
      int32_t best = diag;
      EditOp op = is_match ? EditOp::kMatch : EditOp::kSubstitution;
      if (ins < best) {
        best = ins;
        op = EditOp::kInsertion;
      }
      if (del < best) {
        best = del;
        op = EditOp::kDeletion;
      }
      cost[i][j] = best;
      back[i][j] = op;
    }
  }
  std::vector<EditOp> path;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const EditOp op = back[i][j];
    path.push_back(op);
    switch (op) {
      case EditOp::kMatch:
      case EditOp::kSubstitution:
        --i;
        --j;
        break;
      case EditOp::kInsertion:
        --i;
        break;
      case EditOp::kDeletion:
        --j;
        break;
    }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

WerBreakdown wer(const std::vector<int>& hyp, const std::vector<int>& ref) {
  WerBreakdown b;
  b.n_ref_tokens = static_cast<int64_t>(ref.size());
  for (EditOp op : align_tokens(hyp, ref)) {
    switch (op) {
      case EditOp::kMatch:
        break;
      case EditOp::kSubstitution:
        ++b.substitutions;
        break;
      case EditOp::kInsertion:
        ++b.insertions;
        break;
      case EditOp::kDeletion:
        ++b.deletions;
        break;
    }
  }
  return b;
}

WerBreakdown corpus_wer(
    const std::function<std::vector<int>(int64_t)>& decode,
    const std::function<const std::vector<int>&(int64_t)>& reference,
    const std::vector<int64_t>& utt_indices) {
  require(!utt_indices.empty(), "corpus_wer: empty split");
  WerBreakdown total;
  for (int64_t idx : utt_indices) {
    total.accumulate(wer(decode(idx), reference(idx)));
  }
  return total;
}

}  // namespace adaptasr::eval
