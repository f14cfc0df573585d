// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_CTC_H_
#define ZEROPROMPT_CTC_H_

#include <vector>

#include "zeroprompt/matrix.h"

namespace zeroprompt {

// Token id 0 is the CTC blank everywhere in this project. Decoded
// sequences never contain it.
constexpr int kBlankId = 0;

using TokenSeq = std::vector<int>;

// Carries the previous frame's argmax across chunk boundaries so chunked
// greedy decoding collapses exactly like a whole-sequence pass.
struct CollapseState {
  int prev_id = -1;  // -1 at stream start
};

// Standard CTC greedy collapse (drop repeats, then drop blanks) over a
// sequence of per-frame argmax ids. Appends emitted tokens to `out` and
// threads `state` so the call can be split at any frame boundary.
void greedy_collapse(const std::vector<int>& frame_argmax, CollapseState* state,
                     TokenSeq* out);

// Whole-sequence convenience wrapper.
TokenSeq greedy_collapse(const std::vector<int>& frame_argmax);

// Per-frame argmax of a (frames x vocab) log-prob matrix; ties go to the
// lowest id for determinism.
std::vector<int> frame_argmax(const Matrix& logprobs);

// Negative log probability of `target` under the log-prob matrix
// (frames x vocab), summed over all valid CTC alignments by the forward
// recursion in log space. Accumulates in double. Returns +infinity when no
// alignment exists (target too long for the frame count).
double ctc_loss(const Matrix& logprobs, const TokenSeq& target);

struct CtcGrad {
  Matrix grad;      // d loss / d logits (pre-log-softmax), frames x vocab
  double loss = 0.0;
  bool feasible = true;  // false: grad is all zeros and loss is +inf
};

// Gradient of ctc_loss with respect to the logits, via forward-backward
// posteriors: grad = softmax(logits) - posterior.
CtcGrad ctc_grad(const Matrix& logprobs, const TokenSeq& target);

struct EditCounts {
  long substitutions = 0;
  long deletions = 0;   // tokens present in ref but not hyp
  long insertions = 0;  // tokens present in hyp but not ref
  long total() const { return substitutions + deletions + insertions; }
};

// Levenshtein distance with unit costs. Ties are broken preferring
// substitution over insertion over deletion, fixed for determinism.
EditCounts edit_distance(const TokenSeq& hyp, const TokenSeq& ref);

namespace detail {

// Double-precision core behind ctc_loss/ctc_grad, exposed so verification
// can run finite differences without float32 storage noise. logprobs is
// row-major frames x vocab.
double ctc_loss_grad_f64(const std::vector<double>& logprobs, int frames, int vocab,
                         const TokenSeq& target, std::vector<double>* grad,
                         bool* feasible);

}  // namespace detail

}  // namespace zeroprompt

#endif  // ZEROPROMPT_CTC_H_
