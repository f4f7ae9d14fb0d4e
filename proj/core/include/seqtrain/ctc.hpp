// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_CTC_HPP
#define SEQTRAIN_CTC_HPP

#include <Eigen/Dense>
#include <vector>

namespace seqtrain {

// Tokens are integers in [0, K-1]; the blank takes index K (last output).
using LabelSequence = std::vector<int>;

struct CtcResult {
  double loss = 0.0;              // negative log probability, nats
  Eigen::MatrixXd grad_logits;    // T x (K+1), gradient w.r.t. pre-softmax
};

/// CTC loss over all alignments collapsing to `labels`, computed with
/// log-space forward-backward recursions. `posteriors` is T x (K+1) with the
/// blank in the last column. The returned gradient is taken with respect to
/// the pre-softmax logits (fused softmax + CTC).
/// Throws InfeasibleAlignment when T < L + (number of adjacent repeats).
CtcResult ctc_loss(const Eigen::MatrixXd& posteriors,
                   const LabelSequence& labels);

/// CTC collapsing: merge adjacent repeats, then delete blanks.
LabelSequence collapse_path(const std::vector<int>& path, int blank_index);

/// Per-frame argmax (ties toward the lowest index) followed by collapsing.
LabelSequence greedy_decode(const Eigen::MatrixXd& posteriors);

/// Unit-cost edit distance.
int levenshtein(const LabelSequence& a, const LabelSequence& b);

/// 100 * (1 - edit_distance / max(|ref|, 1)). Can be negative.
double token_accuracy(const LabelSequence& hyp, const LabelSequence& ref);

}  // namespace seqtrain

#endif  // SEQTRAIN_CTC_HPP
