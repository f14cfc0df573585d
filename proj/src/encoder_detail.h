// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
//
// Internal pieces shared by the inference forward (encoder.cc) and the
// training forward/backward (autograd.cc). Both build on the identical
// linalg calls in the identical order, which is what keeps the traced
// training forward bit-identical to forward_offline.

#ifndef ZEROPROMPT_SRC_ENCODER_DETAIL_H_
#define ZEROPROMPT_SRC_ENCODER_DETAIL_H_

#include <vector>

#include "zeroprompt/encoder.h"
#include "zeroprompt/matrix.h"

namespace zeroprompt::detail {

constexpr float kLayerNormEps = 1e-5f;

// Everything the backward pass needs from one layer's forward.
struct LayerTape {
  Matrix x_in;
  Matrix ln1_xhat;
  std::vector<float> ln1_istd;
  Matrix q, k, v;                 // projections of the ln1 output
  std::vector<Matrix> head_probs; // per head, rows x rows
  Matrix head_ctx;                // concatenated per-head context (pre-wo)
  Matrix h;                       // x_in + attention output
  Matrix ln2_xhat;
  std::vector<float> ln2_istd;
  Matrix ffn_z1;                  // pre-relu
  Matrix ffn_a1;                  // post-relu
};

struct EncoderTape {
  Matrix stacked;   // stacked input features
  Matrix x_emb;     // after input projection + positions
  AttnMask mask;    // offline chunk-causal mask used throughout
  std::vector<LayerTape> layers;
  Matrix x_final;   // input to the output projection
  Matrix logits;
  Matrix logprobs;
};

// y = x * w + b (b broadcast over rows).
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<float>& b);

// Rows of `a` followed by rows of `b`; either may be empty.
Matrix vconcat(const Matrix& a, const Matrix& b);

// Copy of rows [0, n).
Matrix top_rows(const Matrix& m, int n);

// Copy of rows [n, m.rows).
Matrix bottom_rows(const Matrix& m, int n);

// Column slice [c0, c0 + n).
Matrix col_slice(const Matrix& m, int c0, int n);

void add_inplace(Matrix* x, const Matrix& y);

// One pre-norm encoder layer over the current rows `x`, attending to
// k_cache/v_cache (may be 0-row) followed by the current rows' own
// projections. mask must be (x.rows, cache_rows + x.rows). k_new/v_new
// receive the current rows' key/value projections for cache maintenance.
// When tape != nullptr the caches must be empty (training is offline).
Matrix layer_forward(const EncoderConfig& cfg, const LayerWeights& lw, const Matrix& x,
                     const Matrix& k_cache, const Matrix& v_cache, const AttnMask& mask,
                     Matrix* k_new, Matrix* v_new, LayerTape* tape);

// Offline chunk-causal mask: row i (in chunk i / block) attends within its
// chunk and to left_chunks chunks of history.
AttnMask offline_mask(int total_rows, int block, int left_chunks);

// Shared trunk of forward_offline: stacked input -> logprobs, recording
// into `tape` when given.
Matrix forward_full(const EncoderConfig& cfg, const EncoderWeights& w,
                    const Matrix& feats, EncoderTape* tape);

}  // namespace zeroprompt::detail

#endif  // ZEROPROMPT_SRC_ENCODER_DETAIL_H_
