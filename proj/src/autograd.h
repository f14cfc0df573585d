// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
//
// Training support: a taped offline forward plus the manual backward pass
// through the encoder. Gradients live in an EncoderWeights-shaped container.

#ifndef ZEROPROMPT_SRC_AUTOGRAD_H_
#define ZEROPROMPT_SRC_AUTOGRAD_H_

#include <vector>

#include "encoder_detail.h"
#include "zeroprompt/encoder.h"

namespace zeroprompt::detail {

// Zero-valued weights with the shapes of `cfg`; used as a gradient container.
EncoderWeights make_zero_weights(const EncoderConfig& cfg);

// Offline forward recording everything the backward needs. The log-prob
// output is bit-identical to forward_offline.
Matrix forward_traced(const EncoderConfig& cfg, const EncoderWeights& w,
                      const Matrix& feats, EncoderTape* tape);

// Backward from d loss / d logits through every layer down to the input
// projection. Returns gradients for all weights.
EncoderWeights encoder_backward(const EncoderConfig& cfg, const EncoderWeights& w,
                                const EncoderTape& tape, const Matrix& dlogits);

// Fixed-order enumeration of every parameter tensor, for the optimizer.
struct ParamViews {
  std::vector<Matrix*> mats;
  std::vector<std::vector<float>*> vecs;
};
ParamViews param_views(EncoderWeights& w);

void accumulate(EncoderWeights* into, const EncoderWeights& grads);
double grad_global_norm(const EncoderWeights& grads);
void scale_weights(EncoderWeights* w, float s);
void sgd_step(EncoderWeights* w, const EncoderWeights& grads, float lr);

}  // namespace zeroprompt::detail

#endif  // ZEROPROMPT_SRC_AUTOGRAD_H_
