// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include "zeroprompt/ctc.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace zeroprompt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Extended label sequence: blank, l1, blank, l2, ..., blank (length 2L+1).
std::vector<int> extend_labels(const TokenSeq& target) {
  std::vector<int> ext(2 * target.size() + 1, kBlankId);
  for (size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

bool feasible_target(int frames, const TokenSeq& target) {
  int repeats = 0;
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++repeats;
  }
  return frames >= static_cast<int>(target.size()) + repeats;
}

void validate_target(int vocab, const TokenSeq& target) {
  for (int t : target) {
    if (t <= 0 || t >= vocab) {
      throw std::invalid_argument("ctc: target token " + std::to_string(t) +
                                  " outside [1, " + std::to_string(vocab) + ")");
    }
  }
}

// Double-precision forward(-backward) over the extended label sequence.
// logprobs is row-major frames x vocab. When grad != nullptr it receives
// d loss / d logits. Returns the loss; infeasible targets yield +inf and a
// zero gradient.
double ctc_core(const std::vector<double>& logprobs, int frames, int vocab,
                const TokenSeq& target, std::vector<double>* grad, bool* feasible_out) {
  validate_target(vocab, target);
  if (frames < 1) throw std::invalid_argument("ctc: need at least one frame");
  if (grad) grad->assign(static_cast<size_t>(frames) * vocab, 0.0);
  if (!feasible_target(frames, target)) {
    if (feasible_out) *feasible_out = false;
    return std::numeric_limits<double>::infinity();
  }
  if (feasible_out) *feasible_out = true;

  const std::vector<int> ext = extend_labels(target);
  const int S = static_cast<int>(ext.size());
  auto lp = [&](int t, int v) { return logprobs[static_cast<size_t>(t) * vocab + v]; };

  std::vector<double> alpha(static_cast<size_t>(frames) * S, kNegInf);
  auto a = [&](int t, int s) -> double& { return alpha[static_cast<size_t>(t) * S + s]; };
  a(0, 0) = lp(0, ext[0]);
  if (S > 1) a(0, 1) = lp(0, ext[1]);
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < S; ++s) {
      double sum = a(t - 1, s);
      if (s >= 1) sum = log_add(sum, a(t - 1, s - 1));
      if (s >= 2 && ext[s] != kBlankId && ext[s] != ext[s - 2]) {
        sum = log_add(sum, a(t - 1, s - 2));
      }
      if (sum != kNegInf) a(t, s) = sum + lp(t, ext[s]);
    }
  }
  double log_p = a(frames - 1, S - 1);
  if (S > 1) log_p = log_add(log_p, a(frames - 1, S - 2));

  if (grad) {
    std::vector<double> beta(static_cast<size_t>(frames) * S, kNegInf);
    auto b = [&](int t, int s) -> double& { return beta[static_cast<size_t>(t) * S + s]; };
    b(frames - 1, S - 1) = lp(frames - 1, ext[S - 1]);
    if (S > 1) b(frames - 1, S - 2) = lp(frames - 1, ext[S - 2]);
    for (int t = frames - 2; t >= 0; --t) {
      for (int s = S - 1; s >= 0; --s) {
        double sum = b(t + 1, s);
        if (s + 1 < S) sum = log_add(sum, b(t + 1, s + 1));
        if (s + 2 < S && ext[s + 2] != kBlankId && ext[s + 2] != ext[s]) {
          sum = log_add(sum, b(t + 1, s + 2));
        }
        if (sum != kNegInf) b(t, s) = sum + lp(t, ext[s]);
      }
    }
    // grad = softmax(logits) - posterior; alpha and beta both include the
    // emission at t, so one copy is divided back out.
    for (int t = 0; t < frames; ++t) {
      std::vector<double> log_post(vocab, kNegInf);
      for (int s = 0; s < S; ++s) {
        if (a(t, s) == kNegInf || b(t, s) == kNegInf) continue;
        const int v = ext[s];
        log_post[v] = log_add(log_post[v], a(t, s) + b(t, s) - lp(t, v));
      }
      for (int v = 0; v < vocab; ++v) {
        const double softmax = std::exp(lp(t, v));
        const double post = log_post[v] == kNegInf ? 0.0 : std::exp(log_post[v] - log_p);
        (*grad)[static_cast<size_t>(t) * vocab + v] = softmax - post;
      }
    }
  }
  return -log_p;
}

std::vector<double> promote(const Matrix& m) {
  std::vector<double> out(m.data.size());
  for (size_t i = 0; i < m.data.size(); ++i) out[i] = static_cast<double>(m.data[i]);
  return out;
}

}  // namespace

void greedy_collapse(const std::vector<int>& frame_argmax, CollapseState* state,
                     TokenSeq* out) {
  int prev = state->prev_id;
  for (int id : frame_argmax) {
    if (id != kBlankId && id != prev) out->push_back(id);
    prev = id;
  }
  state->prev_id = prev;
}

TokenSeq greedy_collapse(const std::vector<int>& frame_argmax) {
  CollapseState state;
  TokenSeq out;
  greedy_collapse(frame_argmax, &state, &out);
  return out;
}

std::vector<int> frame_argmax(const Matrix& logprobs) {
  std::vector<int> ids(logprobs.rows);
  for (int t = 0; t < logprobs.rows; ++t) {
    const float* row = logprobs.row(t);
    ids[t] = static_cast<int>(std::max_element(row, row + logprobs.cols) - row);
  }
  return ids;
}

double ctc_loss(const Matrix& logprobs, const TokenSeq& target) {
  return ctc_core(promote(logprobs), logprobs.rows, logprobs.cols, target, nullptr,
                  nullptr);
}

CtcGrad ctc_grad(const Matrix& logprobs, const TokenSeq& target) {
  std::vector<double> g;
  CtcGrad result;
  result.loss =
      ctc_core(promote(logprobs), logprobs.rows, logprobs.cols, target, &g, &result.feasible);
  result.grad = Matrix(logprobs.rows, logprobs.cols);
  for (size_t i = 0; i < g.size(); ++i) result.grad.data[i] = static_cast<float>(g[i]);
  return result;
}

namespace detail {

double ctc_loss_grad_f64(const std::vector<double>& logprobs, int frames, int vocab,
                         const TokenSeq& target, std::vector<double>* grad,
                         bool* feasible) {
  return ctc_core(logprobs, frames, vocab, target, grad, feasible);
}

}  // namespace detail

EditCounts edit_distance(const TokenSeq& hyp, const TokenSeq& ref) {
  const int n = static_cast<int>(hyp.size());
  const int m = static_cast<int>(ref.size());
  struct Cell {
    long s = 0, d = 0, i = 0;
    long total() const { return s + d + i; }
  };
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (int j = 1; j <= m; ++j) prev[j].d = j;  // empty hyp: all deletions
  for (int i = 1; i <= n; ++i) {
    cur[0] = Cell{0, 0, i};  // empty ref: all insertions
    for (int j = 1; j <= m; ++j) {
      Cell sub = prev[j - 1];
      if (hyp[i - 1] != ref[j - 1]) ++sub.s;
      Cell ins = prev[j];
      ++ins.i;
      Cell del = cur[j - 1];
      ++del.d;
      // Tie order: substitution, insertion, deletion.
      Cell best = sub;
      if (ins.total() < best.total()) best = ins;
      if (del.total() < best.total()) best = del;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return EditCounts{prev[m].s, prev[m].d, prev[m].i};
}

}  // namespace zeroprompt
