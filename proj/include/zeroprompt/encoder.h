// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_ENCODER_H_
#define ZEROPROMPT_ENCODER_H_

#include <cstdint>
#include <vector>

#include "zeroprompt/matrix.h"

namespace zeroprompt {

// Streaming transformer encoder with pre-norm layers, per-layer key/value
// caches of past real frames, chunk-level autoregressive masking and
// zero-prompt frame appending.
//
// A "zero prompt" is a run of zeroed frames appended after the real frames
// of a chunk. The mask keeps real frames blind to them, so the real-frame
// output is bit-identical with and without the prompt; the prompt rows see
// the full real context and emit speculative future tokens.

struct EncoderConfig {
  int num_layers = 2;
  int d_model = 32;
  int n_heads = 4;
  int ffn_dim = 64;
  int vocab_size = 8;  // includes blank id 0
  int feat_dim = 8;
  int frame_ms = 10;   // duration of one input feature frame
  int subsample = 1;   // frame-stacking factor ahead of the input projection
  int chunk_frames = 8;   // input frames per streaming chunk
  int left_chunks = -1;   // history-cache span in chunks; -1 = unlimited

  // Encoder rows per chunk after frame stacking.
  int block_rows() const { return chunk_frames / subsample; }

  void validate() const;
};

// Zero-prompt length and the encoder layer the zeroed rows enter at.
// start_layer 0 appends zeroed frames ahead of the input projection (the
// default scheme); start_layer L >= 1 appends zero-valued hidden rows to the
// input of layer L so layers below L do no prompt computation; -1 disables.
// zp_frames == 0 and start_layer == -1 both mean "disabled" and are
// normalized to each other.
struct ZeroPromptSpec {
  int zp_frames = 0;    // zero-prompt length in input frames
  int start_layer = 0;

  static ZeroPromptSpec disabled() { return ZeroPromptSpec{0, -1}; }
  bool enabled() const { return zp_frames > 0 && start_layer >= 0; }
  ZeroPromptSpec normalized() const;
  void validate(const EncoderConfig& cfg) const;
};

struct LayerWeights {
  Matrix wq, wk, wv, wo;             // d_model x d_model
  std::vector<float> bq, bk, bv, bo; // d_model
  std::vector<float> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  Matrix ffn_w1;                     // d_model x ffn_dim
  std::vector<float> ffn_b1;
  Matrix ffn_w2;                     // ffn_dim x d_model
  std::vector<float> ffn_b2;
};

struct EncoderWeights {
  Matrix in_w;              // (feat_dim * subsample) x d_model
  std::vector<float> in_b;
  std::vector<LayerWeights> layers;
  Matrix out_w;             // d_model x vocab_size
  std::vector<float> out_b;

  void validate(const EncoderConfig& cfg) const;
};

struct Model {
  EncoderConfig cfg;
  EncoderWeights weights;
};

// Per-layer cached key/value rows of past real frames. Zero-prompt rows are
// never written here; when left_chunks bounds the history the cache keeps
// the trailing left_chunks * block_rows rows.
struct AttentionCache {
  std::vector<Matrix> k;  // per layer, cached rows x d_model
  std::vector<Matrix> v;
  int64_t rows_consumed = 0;  // real encoder rows consumed so far

  bool empty() const { return k.empty(); }
  int cached_rows() const { return k.empty() ? 0 : k[0].rows; }
};

struct ChunkOutput {
  Matrix logprobs_real;  // real encoder rows x vocab
  Matrix logprobs_zp;    // zero-prompt rows x vocab (0 rows when disabled)
  AttentionCache cache;  // updated cache, real frames only
};

// Chunk-level autoregressive mask over cache + real + zero-prompt columns.
// Real queries attend to every cache and real column and to no zero-prompt
// column. The zero-prompt region is partitioned into consecutive blocks of
// `block` rows (the last may be short); a prompt query attends to cache,
// all real columns, and prompt columns up to the end of its own block.
AttnMask build_chunk_mask(int n_cache, int n_real, int n_zp, int block);

// One streaming step: runs `real_feats` (input frames x feat_dim) plus the
// zero-prompt region through the encoder on top of `cache`. The real-row
// log-probs are bit-identical to a run with the prompt disabled, and the
// returned cache holds only real frames.
ChunkOutput forward_chunk(const EncoderConfig& cfg, const EncoderWeights& w,
                          const AttentionCache& cache, const Matrix& real_feats,
                          const ZeroPromptSpec& zp);

// Whole-utterance pass under the same chunk-causal mask the streaming path
// induces (each frame sees its own chunk plus left_chunks of history).
// Reference implementation for streaming-equivalence checks.
Matrix forward_offline(const EncoderConfig& cfg, const EncoderWeights& w,
                       const Matrix& feats);

// Deterministic scaled-uniform initialization.
EncoderWeights init_weights(const EncoderConfig& cfg, uint64_t seed);

// Sinusoidal absolute encodings for positions [first, first + n). Prompt
// rows continue the index sequence of the real rows they follow.
Matrix sinusoidal_positions(int64_t first, int n, int d_model);

// Frame stacking by the configured subsample factor; the trailing partial
// group (if any) is zero-padded. Returns rows of feat_dim * subsample.
Matrix stack_frames(const Matrix& feats, int subsample);

}  // namespace zeroprompt

#endif  // ZEROPROMPT_ENCODER_H_
