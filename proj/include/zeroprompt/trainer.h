// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_TRAINER_H_
#define ZEROPROMPT_TRAINER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "zeroprompt/encoder.h"
#include "zeroprompt/engine.h"
#include "zeroprompt/io.h"
#include "zeroprompt/metrics.h"

namespace zeroprompt {

// Bigram grammar over real token ids 1..vocab_size-1 with fixed per-token
// feature embeddings. Utterances are leading silence (zero frames), one
// embedding block per token with additive noise, and trailing silence.
struct SyntheticGrammar {
  int vocab_size = 17;       // includes blank id 0
  Matrix transition;         // (vocab_size-1) x (vocab_size-1), row-stochastic
  Matrix embeddings;         // (vocab_size-1) x feat_dim
  int frames_per_token = 3;  // >= 2
  int lead_silence_frames = 6;
  int trail_silence_frames = 12;
  float noise_std = 0.1f;
  uint64_t seed = 1;

  int feat_dim() const { return embeddings.cols; }
  void validate() const;
};

// Grammar with `branches` likely successors per token (probability mass
// (1 - spread) split across them, the rest spread uniformly), deterministic
// in `seed`. Low transition entropy is what makes future tokens guessable
// from context alone.
SyntheticGrammar default_grammar(int vocab_size, int feat_dim, uint64_t seed,
                                 int branches = 2, float spread = 0.05f);

struct TrainConfig {
  int epochs = 30;
  float learning_rate = 0.2f;
  int batch_size = 1;
  float grad_clip = 5.0f;  // global-norm clip
  uint64_t seed = 1;
};

struct TrainResult {
  EncoderWeights weights;
  std::vector<double> loss_curve;  // mean CTC loss per epoch
};

// Deterministic utterance sampling; token count uniform in
// [min_tokens, max_tokens].
Corpus gen_corpus(const SyntheticGrammar& grammar, int n_utts, int min_tokens,
                  int max_tokens);

// Plain SGD with global-norm gradient clipping over the offline
// chunk-causal forward. Deterministic under cfg.seed. Throws on divergence
// (NaN loss) naming the offending step.
TrainResult train(const EncoderConfig& cfg, const Corpus& corpus, const TrainConfig& tcfg);

// Greedy WER of offline decoding over a corpus; the trained-model quality
// gate.
double greedy_wer(const Model& model, const Corpus& corpus);

// One stream_decode pass per utterance per config; aggregates metrics into
// one report row per config.
std::vector<BenchRow> evaluate(const Model& model, const Corpus& corpus,
                               const std::vector<StreamConfig>& configs);

// The pinned desk-scale setup: seeds, grammar, encoder size and epoch
// budget committed so trained-behavior checks are reproducible.
struct ToyPreset {
  EncoderConfig encoder;
  SyntheticGrammar grammar;
  TrainConfig train;
  int train_utts = 0;
  int heldout_utts = 0;
  int min_tokens = 0;
  int max_tokens = 0;

  Corpus train_corpus() const;
  Corpus heldout_corpus() const;
};
ToyPreset toy_preset();

}  // namespace zeroprompt

#endif  // ZEROPROMPT_TRAINER_H_
