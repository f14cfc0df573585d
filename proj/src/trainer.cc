// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include "zeroprompt/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "autograd.h"
#include "zeroprompt/ctc.h"
#include "zeroprompt/linalg.h"
#include "zeroprompt/rng.h"

namespace zeroprompt {

void SyntheticGrammar::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("grammar: vocab_size must be >= 2");
  const int n_real = vocab_size - 1;
  if (transition.rows != n_real || transition.cols != n_real) {
    throw std::invalid_argument("grammar: transition must be " + std::to_string(n_real) +
                                "x" + std::to_string(n_real));
  }
  if (embeddings.rows != n_real || embeddings.cols < 1) {
    throw std::invalid_argument("grammar: embeddings must have one row per real token");
  }
  for (int i = 0; i < transition.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < transition.cols; ++j) {
      if (transition.at(i, j) < 0.0f) throw std::invalid_argument("grammar: negative transition");
      sum += transition.at(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("grammar: transition row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
    }
  }
  if (frames_per_token < 2) throw std::invalid_argument("grammar: frames_per_token must be >= 2");
  if (lead_silence_frames < 0 || trail_silence_frames < 0) {
    throw std::invalid_argument("grammar: negative silence length");
  }
  if (noise_std < 0.0f) throw std::invalid_argument("grammar: negative noise_std");
}

SyntheticGrammar default_grammar(int vocab_size, int feat_dim, uint64_t seed, int branches,
                                 float spread) {
  if (vocab_size < 3) throw std::invalid_argument("default_grammar: vocab_size must be >= 3");
  const int n_real = vocab_size - 1;
  branches = std::min(branches, n_real - 1);
  SyntheticGrammar g;
  g.vocab_size = vocab_size;
  g.seed = seed;
  Rng rng(seed);

  g.embeddings = Matrix(n_real, feat_dim);
  for (float& v : g.embeddings.data) v = static_cast<float>(rng.normal());

  g.transition = Matrix(n_real, n_real);
  const float base = spread / static_cast<float>(n_real - branches);
  for (int i = 0; i < n_real; ++i) {
    for (int j = 0; j < n_real; ++j) g.transition.at(i, j) = base;
    // Pick `branches` distinct successors and give them the main mass,
    // slightly tilted toward the first pick.
    std::vector<int> picks;
    while (static_cast<int>(picks.size()) < branches) {
      const int j = static_cast<int>(rng.below(n_real));
      if (std::find(picks.begin(), picks.end(), j) == picks.end()) picks.push_back(j);
    }
    const float mass = 1.0f - spread;
    for (int b = 0; b < branches; ++b) {
      const float share = b == 0 ? mass * 0.7f : mass * 0.3f / static_cast<float>(branches - 1);
      g.transition.at(i, picks[b]) += branches == 1 ? mass : share;
    }
    // Renormalize exactly.
    float sum = 0.0f;
    for (int j = 0; j < n_real; ++j) sum += g.transition.at(i, j);
    for (int j = 0; j < n_real; ++j) g.transition.at(i, j) /= sum;
  }
  g.validate();
  return g;
}

namespace {

int sample_categorical(Rng* rng, const float* weights, int n) {
  double u = rng->uniform();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += static_cast<double>(weights[i]);
    if (u < acc) return i;
  }
  return n - 1;
}

}  // namespace

Corpus gen_corpus(const SyntheticGrammar& grammar, int n_utts, int min_tokens,
                  int max_tokens) {
  grammar.validate();
  if (n_utts < 1) throw std::invalid_argument("gen_corpus: n_utts must be >= 1");
  if (min_tokens < 1 || max_tokens < min_tokens) {
    throw std::invalid_argument("gen_corpus: bad token count range");
  }
  Rng rng(grammar.seed);
  const int n_real = grammar.vocab_size - 1;
  Corpus corpus;
  corpus.feat_dim = grammar.feat_dim();

  for (int u = 0; u < n_utts; ++u) {
    Utterance utt;
    utt.id = "utt" + std::to_string(u);
    const int n_tokens =
        min_tokens + static_cast<int>(rng.below(static_cast<uint64_t>(max_tokens - min_tokens + 1)));
    int token = static_cast<int>(rng.below(n_real));  // 0-based over real tokens
    for (int t = 0; t < n_tokens; ++t) {
      if (t > 0) token = sample_categorical(&rng, grammar.transition.row(token), n_real);
      utt.reference.push_back(token + 1);
    }
    const int frames = grammar.lead_silence_frames + n_tokens * grammar.frames_per_token +
                       grammar.trail_silence_frames;
    utt.feats = Matrix(frames, grammar.feat_dim());
    int row = grammar.lead_silence_frames;
    for (int t = 0; t < n_tokens; ++t) {
      const float* emb = grammar.embeddings.row(utt.reference[t] - 1);
      for (int f = 0; f < grammar.frames_per_token; ++f, ++row) {
        float* dst = utt.feats.row(row);
        for (int c = 0; c < grammar.feat_dim(); ++c) {
          dst[c] = emb[c] + (grammar.noise_std > 0.0f
                                 ? grammar.noise_std * static_cast<float>(rng.normal())
                                 : 0.0f);
        }
      }
    }
    corpus.utts.push_back(std::move(utt));
  }
  return corpus;
}

TrainResult train(const EncoderConfig& cfg, const Corpus& corpus, const TrainConfig& tcfg) {
  cfg.validate();
  if (corpus.utts.empty()) throw std::invalid_argument("train: empty corpus");
  if (corpus.feat_dim != cfg.feat_dim) {
    throw std::invalid_argument("train: corpus feat_dim does not match config");
  }
  if (tcfg.epochs < 0 || tcfg.learning_rate < 0.0f || tcfg.batch_size < 1 ||
      tcfg.grad_clip <= 0.0f) {
    throw std::invalid_argument("train: bad training config");
  }
  for (const auto& u : corpus.utts) {
    // Alignment feasibility: every target must fit its frame count.
    const int rows = stack_frames(u.feats, cfg.subsample).rows;
    int needed = static_cast<int>(u.reference.size());
    for (size_t i = 1; i < u.reference.size(); ++i) {
      if (u.reference[i] == u.reference[i - 1]) ++needed;
    }
    if (rows < needed) {
      throw std::invalid_argument("train: utterance " + u.id + " has infeasible target");
    }
  }

  TrainResult result;
  result.weights = init_weights(cfg, tcfg.seed);
  Rng shuffle_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<size_t> order(corpus.utts.size());
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    // Fisher-Yates with the session rng keeps runs reproducible.
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double epoch_loss = 0.0;
    int counted = 0;
    EncoderWeights batch_grads = detail::make_zero_weights(cfg);
    int in_batch = 0;
    for (size_t oi = 0; oi < order.size(); ++oi) {
      const Utterance& utt = corpus.utts[order[oi]];
      ++step;
      detail::EncoderTape tape;
      CtcGrad cg;
      try {
        detail::forward_traced(cfg, result.weights, utt.feats, &tape);
        cg = ctc_grad(tape.logprobs, utt.reference);
      } catch (const std::exception& e) {
        // Exploding weights surface as non-finite values inside the forward.
        throw std::runtime_error("train: diverged at step " + std::to_string(step) + ": " +
                                 e.what());
      }
      if (std::isnan(cg.loss)) {
        throw std::runtime_error("train: diverged (NaN loss) at step " + std::to_string(step));
      }
      if (!cg.feasible) continue;  // guarded above; kept for safety
      epoch_loss += cg.loss;
      ++counted;
      detail::accumulate(&batch_grads,
                         detail::encoder_backward(cfg, result.weights, tape, cg.grad));
      ++in_batch;
      if (in_batch == tcfg.batch_size || oi + 1 == order.size()) {
        detail::scale_weights(&batch_grads, 1.0f / static_cast<float>(in_batch));
        const double norm = detail::grad_global_norm(batch_grads);
        if (norm > tcfg.grad_clip) {
          detail::scale_weights(&batch_grads, static_cast<float>(tcfg.grad_clip / norm));
        }
        detail::sgd_step(&result.weights, batch_grads, tcfg.learning_rate);
        batch_grads = detail::make_zero_weights(cfg);
        in_batch = 0;
      }
    }
    result.loss_curve.push_back(counted > 0 ? epoch_loss / counted : 0.0);
  }
  return result;
}

double greedy_wer(const Model& model, const Corpus& corpus) {
  std::vector<std::pair<std::string, TokenSeq>> hyps, refs;
  for (const auto& utt : corpus.utts) {
    const Matrix logprobs = forward_offline(model.cfg, model.weights, utt.feats);
    hyps.emplace_back(utt.id, greedy_collapse(frame_argmax(logprobs)));
    refs.emplace_back(utt.id, utt.reference);
  }
  return wer(hyps, refs);
}

ToyPreset toy_preset() {
  ToyPreset p;
  p.encoder.num_layers = 3;
  p.encoder.d_model = 32;
  p.encoder.n_heads = 4;
  p.encoder.ffn_dim = 64;
  p.encoder.vocab_size = 17;  // 16 real tokens + blank
  p.encoder.feat_dim = 8;
  p.encoder.frame_ms = 10;
  p.encoder.subsample = 1;
  p.encoder.chunk_frames = 8;  // 80ms chunks
  p.encoder.left_chunks = -1;
  p.grammar = default_grammar(p.encoder.vocab_size, p.encoder.feat_dim, 2026);
  p.train.epochs = 30;
  p.train.learning_rate = 0.2f;
  p.train.batch_size = 1;
  p.train.grad_clip = 5.0f;
  p.train.seed = 7;
  p.train_utts = 400;
  p.heldout_utts = 60;
  p.min_tokens = 3;
  p.max_tokens = 8;
  return p;
}

Corpus ToyPreset::train_corpus() const {
  return gen_corpus(grammar, train_utts, min_tokens, max_tokens);
}

Corpus ToyPreset::heldout_corpus() const {
  SyntheticGrammar g = grammar;
  g.seed = grammar.seed ^ 0x5bd1e995u;  // disjoint draw, same distribution
  Corpus c = gen_corpus(g, heldout_utts, min_tokens, max_tokens);
  for (auto& u : c.utts) u.id = "held_" + u.id;
  return c;
}

std::vector<BenchRow> evaluate(const Model& model, const Corpus& corpus,
                               const std::vector<StreamConfig>& configs) {
  if (configs.empty()) throw std::invalid_argument("evaluate: no stream configs");
  if (corpus.utts.empty()) throw std::invalid_argument("evaluate: empty corpus");
  std::vector<BenchRow> rows;
  for (const auto& sc : configs) {
    std::vector<Timeline> timelines;
    std::vector<TokenSeq> refs;
    std::vector<PromptRecord> records;
    for (const auto& utt : corpus.utts) {
      Timeline tl = stream_decode(model, utt.feats, sc, utt.id);
      auto recs = prompt_records_from_timeline(tl);
      records.insert(records.end(), recs.begin(), recs.end());
      timelines.push_back(std::move(tl));
      refs.push_back(utt.reference);
    }
    BenchRow row;
    row.chunk_ms = sc.chunk_ms;
    row.zp_ms = sc.mode == StreamMode::kZeroPrompt ? sc.zp_ms : 0;
    row.start_layer = sc.start_layer;
    row.zp_enabled = sc.mode == StreamMode::kZeroPrompt && sc.zp_ms > 0 && sc.start_layer >= 0;
    row.report = aggregate(records, timelines, refs);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace zeroprompt
