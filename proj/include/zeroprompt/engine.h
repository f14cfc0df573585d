// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_ENGINE_H_
#define ZEROPROMPT_ENGINE_H_

#include <string>
#include <vector>

#include "zeroprompt/ctc.h"
#include "zeroprompt/encoder.h"
#include "zeroprompt/matrix.h"

namespace zeroprompt {

enum class StreamMode { kCausal, kZeroPrompt, kLookAhead };

// One streaming decode session configuration; fields irrelevant to the
// selected mode are ignored.
struct StreamConfig {
  int chunk_ms = 640;
  StreamMode mode = StreamMode::kCausal;
  int zp_ms = 0;           // zeroprompt mode: zero-prompt length
  int start_layer = 0;     // zeroprompt mode: -1 = disabled
  int lookahead_ms = 0;    // lookahead mode: real future waited for
};

// One display update: everything on screen after `cumulative_ms` of audio
// has been consumed. The on-screen text is committed ++ prompt; prompts are
// wholly replaced at the next event, committed only grows.
struct DisplayEvent {
  int64_t cumulative_ms = 0;
  TokenSeq committed;  // decoded from real frames, prefix-monotone
  TokenSeq prompt;     // decoded from the zero-prompt region, may be empty
};

struct Timeline {
  std::string utt_id;
  std::vector<DisplayEvent> events;  // strictly increasing cumulative_ms
  TokenSeq final_hyp;                // equals the last event's committed
  double processing_seconds = 0.0;
  double audio_seconds = 0.0;
};

// Decode one utterance chunk-by-chunk.
//  causal      event per chunk, committed tokens only.
//  zeroprompt  each chunk runs with the zero-prompt region appended;
//              committed tokens are identical to the causal run and each
//              event carries the prompt decoded from the zeroed rows.
//  lookahead   causal decode whose events fire only after lookahead_ms of
//              additional audio, capped at the utterance end (events that
//              collapse onto the same time are merged, last wins).
// The final hypothesis is identical across all three modes.
Timeline stream_decode(const Model& model, const Matrix& feats, const StreamConfig& cfg,
                       const std::string& utt_id = "utt");

// Greedy continuation over the zero-prompt rows. `state` is the collapse
// state after the last real frame; it threads across the real/prompt
// boundary so a token straddling it is not emitted twice, and is discarded
// afterwards (prompts never alter committed state).
TokenSeq extract_prompts(const Matrix& logprobs_zp, CollapseState state);

// On-screen text after an event: committed ++ prompt. The previous event's
// prompt tokens are wholly replaced, never merged.
TokenSeq refine(const TokenSeq& prev_display, const DisplayEvent& event);

// Render token ids for logs: ids 1..26 map to 'a'..'z', larger ids print as
// <id>.
std::string tokens_to_text(const TokenSeq& tokens);

// Timeline log: one JSON object per display event (utt id, cumulative_ms,
// committed text, prompt text) plus a final record with the hypothesis and
// timing totals.
std::string timeline_to_jsonl(const Timeline& timeline);

}  // namespace zeroprompt

#endif  // ZEROPROMPT_ENGINE_H_
