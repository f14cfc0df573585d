// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_LINALG_H_
#define ZEROPROMPT_LINALG_H_

#include <vector>

#include "zeroprompt/matrix.h"

namespace zeroprompt {

// All operations are pure functions with float32 storage, float32
// accumulation and a fixed loop order, so repeated runs are bit-identical.
// Every public operation validates shapes and checks its output for
// NaN/Inf.

// Standard matrix product, a.cols must equal b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

// Scaled dot-product attention where the softmax reduction runs over the
// allowed keys of each query row only. Masked keys never enter the
// computation, so their content has exactly zero influence on the output.
// Throws if any query row has no allowed key.
Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        const AttnMask& mask, float scale);

// Variant that also writes the attention probabilities (n_query x n_key,
// exact zeros at masked cells) for consumers that need them. The output is
// bit-identical to masked_attention.
Matrix masked_attention_probs(const Matrix& q, const Matrix& k, const Matrix& v,
                              const AttnMask& mask, float scale, Matrix* probs);

// Per-row normalization to zero mean / unit variance followed by an affine
// transform. gamma/beta must have x.cols entries.
Matrix layer_norm(const Matrix& x, const std::vector<float>& gamma,
                  const std::vector<float>& beta, float eps);

// As layer_norm, additionally writing the normalized rows (before the
// affine) and each row's 1/sqrt(var + eps). Used by the training backward
// pass; delegating keeps one implementation of the formula.
Matrix layer_norm_stats(const Matrix& x, const std::vector<float>& gamma,
                        const std::vector<float>& beta, float eps,
                        Matrix* normalized, std::vector<float>* inv_std);

// Row-wise log-softmax, stabilized by max subtraction. exp of every output
// row sums to 1 within 1e-6.
Matrix log_softmax(const Matrix& x);

// Throws if m contains NaN or Inf. `what` names the producing operation.
void check_finite(const Matrix& m, const char* what);

}  // namespace zeroprompt

#endif  // ZEROPROMPT_LINALG_H_
