// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include "zeroprompt/engine.h"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace zeroprompt {

namespace {

int ms_to_frames(int ms, int frame_ms, const char* what) {
  if (ms < 0) throw std::invalid_argument(std::string(what) + " must be >= 0");
  if (ms % frame_ms != 0) {
    throw std::invalid_argument(std::string(what) + " (" + std::to_string(ms) +
                                "ms) must be a multiple of the frame duration (" +
                                std::to_string(frame_ms) + "ms)");
  }
  return ms / frame_ms;
}

}  // namespace

TokenSeq extract_prompts(const Matrix& logprobs_zp, CollapseState state) {
  TokenSeq prompt;
  if (logprobs_zp.rows == 0) return prompt;
  greedy_collapse(frame_argmax(logprobs_zp), &state, &prompt);
  return prompt;
}

TokenSeq refine(const TokenSeq& prev_display, const DisplayEvent& event) {
  (void)prev_display;  // previous prompt tokens are wholly replaced
  TokenSeq display = event.committed;
  display.insert(display.end(), event.prompt.begin(), event.prompt.end());
  return display;
}

Timeline stream_decode(const Model& model, const Matrix& feats, const StreamConfig& cfg,
                       const std::string& utt_id) {
  const EncoderConfig& mc = model.cfg;
  if (feats.rows < 1) throw std::invalid_argument("stream_decode: empty feature matrix");
  if (feats.cols != mc.feat_dim) {
    throw std::invalid_argument("stream_decode: feature dim " + std::to_string(feats.cols) +
                                " does not match model feat_dim " +
                                std::to_string(mc.feat_dim));
  }
  const int chunk_frames = ms_to_frames(cfg.chunk_ms, mc.frame_ms, "chunk_ms");
  if (chunk_frames < 1) throw std::invalid_argument("stream_decode: chunk_ms too small");
  if (chunk_frames % mc.subsample != 0) {
    throw std::invalid_argument("stream_decode: chunk_ms must cover a whole number of "
                                "subsampled frames");
  }

  // The encoder session runs at the requested chunk size; the zero-prompt
  // block partition and the cache bound follow it.
  EncoderConfig sc = mc;
  sc.chunk_frames = chunk_frames;

  ZeroPromptSpec zp = ZeroPromptSpec::disabled();
  if (cfg.mode == StreamMode::kZeroPrompt) {
    zp = ZeroPromptSpec{ms_to_frames(cfg.zp_ms, mc.frame_ms, "zp_ms"), cfg.start_layer}
             .normalized();
    zp.validate(sc);
  }
  if (cfg.mode == StreamMode::kLookAhead && cfg.lookahead_ms < 0) {
    throw std::invalid_argument("stream_decode: lookahead_ms must be >= 0");
  }

  const int total_frames = feats.rows;
  const int64_t utt_ms = static_cast<int64_t>(total_frames) * mc.frame_ms;

  Timeline tl;
  tl.utt_id = utt_id;
  tl.audio_seconds = static_cast<double>(utt_ms) / 1000.0;

  AttentionCache cache;
  CollapseState state;
  TokenSeq committed;
  double processing = 0.0;

  const int n_chunks = (total_frames + chunk_frames - 1) / chunk_frames;
  for (int i = 0; i < n_chunks; ++i) {
    const int begin = i * chunk_frames;
    const int end = std::min(begin + chunk_frames, total_frames);
    Matrix chunk(end - begin, feats.cols);
    std::copy(feats.row(begin), feats.row(begin) + chunk.data.size(), chunk.data.begin());

    const auto t0 = std::chrono::steady_clock::now();
    ChunkOutput out = forward_chunk(sc, model.weights, cache, chunk, zp);
    greedy_collapse(frame_argmax(out.logprobs_real), &state, &committed);
    TokenSeq prompt;
    if (cfg.mode == StreamMode::kZeroPrompt && out.logprobs_zp.rows > 0) {
      prompt = extract_prompts(out.logprobs_zp, state);
    }
    const auto t1 = std::chrono::steady_clock::now();
    processing += std::chrono::duration<double>(t1 - t0).count();
    cache = std::move(out.cache);

    int64_t cumulative = std::min<int64_t>(static_cast<int64_t>(i + 1) * cfg.chunk_ms, utt_ms);
    if (cfg.mode == StreamMode::kLookAhead) {
      cumulative = std::min<int64_t>(cumulative + cfg.lookahead_ms, utt_ms);
    }
    tl.events.push_back(DisplayEvent{cumulative, committed, std::move(prompt)});
  }

  // Events pushed to the same time by the lookahead cap collapse into one;
  // the latest state wins.
  std::vector<DisplayEvent> merged;
  for (auto& ev : tl.events) {
    if (!merged.empty() && merged.back().cumulative_ms == ev.cumulative_ms) {
      merged.back() = std::move(ev);
    } else {
      merged.push_back(std::move(ev));
    }
  }
  tl.events = std::move(merged);

  tl.final_hyp = committed;
  tl.processing_seconds = processing;
  return tl;
}

std::string tokens_to_text(const TokenSeq& tokens) {
  std::string out;
  for (int id : tokens) {
    if (id >= 1 && id <= 26) {
      out.push_back(static_cast<char>('a' + id - 1));
    } else {
      out += "<" + std::to_string(id) + ">";
    }
  }
  return out;
}

std::string timeline_to_jsonl(const Timeline& timeline) {
  std::string out;
  for (const auto& ev : timeline.events) {
    nlohmann::json j;
    j["utt"] = timeline.utt_id;
    j["cumulative_ms"] = ev.cumulative_ms;
    j["committed"] = tokens_to_text(ev.committed);
    j["prompt"] = tokens_to_text(ev.prompt);
    j["committed_ids"] = ev.committed;
    j["prompt_ids"] = ev.prompt;
    out += j.dump() + "\n";
  }
  nlohmann::json f;
  f["utt"] = timeline.utt_id;
  f["final_hyp"] = tokens_to_text(timeline.final_hyp);
  f["final_ids"] = timeline.final_hyp;
  f["processing_seconds"] = timeline.processing_seconds;
  f["audio_seconds"] = timeline.audio_seconds;
  out += f.dump() + "\n";
  return out;
}

}  // namespace zeroprompt
