// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  return a > b ? a + std::log1p(std::exp(b - a))
               : b + std::log1p(std::exp(a - b));
}

}  // namespace

CtcResult ctc_loss(const Eigen::MatrixXd& posteriors,
                   const LabelSequence& labels) {
  const int t_len = static_cast<int>(posteriors.rows());
  const int num_out = static_cast<int>(posteriors.cols());
  const int blank = num_out - 1;
  const int l_len = static_cast<int>(labels.size());

  int repeats = 0;
  for (int i = 0; i + 1 < l_len; ++i)
    if (labels[i] == labels[i + 1]) ++repeats;
  if (t_len < l_len + repeats)
    throw InfeasibleAlignment(
        "sequence of " + std::to_string(t_len) + " frames cannot align " +
        std::to_string(l_len) + " labels with " + std::to_string(repeats) +
        " repeats");
  for (int tok : labels)
    if (tok < 0 || tok >= blank)
      throw ShapeError("label " + std::to_string(tok) + " out of range");

  // Augmented label sequence blank,l1,blank,...,blank of length 2L+1.
  const int s_len = 2 * l_len + 1;
  auto symbol = [&](int s) { return s % 2 == 0 ? blank : labels[s / 2]; };
  // Whether a diagonal skip from s-2 to s is allowed.
  auto can_skip = [&](int s) {
    return s >= 2 && symbol(s) != blank && symbol(s) != symbol(s - 2);
  };

  Eigen::MatrixXd log_post(t_len, num_out);
  for (int t = 0; t < t_len; ++t)
    for (int k = 0; k < num_out; ++k)
      log_post(t, k) = posteriors(t, k) > 0 ? std::log(posteriors(t, k))
                                            : kLogZero;

  Eigen::MatrixXd alpha(t_len, s_len), beta(t_len, s_len);
  alpha.setConstant(kLogZero);
  beta.setConstant(kLogZero);

  alpha(0, 0) = log_post(0, blank);
  if (s_len > 1) alpha(0, 1) = log_post(0, symbol(1));
  for (int t = 1; t < t_len; ++t)
    for (int s = 0; s < s_len; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc + log_post(t, symbol(s));
    }

  beta(t_len - 1, s_len - 1) = log_post(t_len - 1, blank);
  if (s_len > 1) beta(t_len - 1, s_len - 2) = log_post(t_len - 1, symbol(s_len - 2));
  for (int t = t_len - 2; t >= 0; --t)
    for (int s = 0; s < s_len; ++s) {
      double acc = beta(t + 1, s);
      if (s + 1 < s_len) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < s_len && can_skip(s + 2))
        acc = log_add(acc, beta(t + 1, s + 2));
      beta(t, s) = acc + log_post(t, symbol(s));
    }

  double log_z = alpha(t_len - 1, s_len - 1);
  if (s_len > 1) log_z = log_add(log_z, alpha(t_len - 1, s_len - 2));
  if (log_z == kLogZero)
    throw InfeasibleAlignment("all alignment paths have zero probability");

  // Fused softmax+CTC gradient: grad = posterior - occupancy.
  // alpha*beta double-counts the frame posterior, so divide it back out.
  CtcResult result;
  result.loss = -log_z;
  result.grad_logits = posteriors;
  for (int t = 0; t < t_len; ++t) {
    Eigen::VectorXd log_gamma = Eigen::VectorXd::Constant(num_out, kLogZero);
    for (int s = 0; s < s_len; ++s) {
      const int k = symbol(s);
      if (log_post(t, k) == kLogZero) continue;
      log_gamma[k] =
          log_add(log_gamma[k], alpha(t, s) + beta(t, s) - log_post(t, k));
    }
    for (int k = 0; k < num_out; ++k)
      if (log_gamma[k] != kLogZero)
        result.grad_logits(t, k) -= std::exp(log_gamma[k] - log_z);
  }
  return result;
}

LabelSequence collapse_path(const std::vector<int>& path, int blank_index) {
  LabelSequence out;
  int prev = -1;
  for (int sym : path) {
    if (sym != prev && sym != blank_index) out.push_back(sym);
    prev = sym;
  }
  return out;
}

LabelSequence greedy_decode(const Eigen::MatrixXd& posteriors) {
  const int blank = static_cast<int>(posteriors.cols()) - 1;
  std::vector<int> path(posteriors.rows());
  for (int t = 0; t < posteriors.rows(); ++t) {
    int best = 0;
    for (int k = 1; k < posteriors.cols(); ++k)
      if (posteriors(t, k) > posteriors(t, best)) best = k;
    path[t] = best;
  }
  return collapse_path(path, blank);
}

int levenshtein(const LabelSequence& a, const LabelSequence& b) {
  std::vector<int> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
    }
  }
  return row[b.size()];
}

double token_accuracy(const LabelSequence& hyp, const LabelSequence& ref) {
  const int dist = levenshtein(hyp, ref);
  const int denom = std::max<int>(static_cast<int>(ref.size()), 1);
  return 100.0 * (1.0 - static_cast<double>(dist) / denom);
}

}  // namespace seqtrain
