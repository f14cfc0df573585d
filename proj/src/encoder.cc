// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include "zeroprompt/encoder.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "encoder_detail.h"
#include "zeroprompt/linalg.h"
#include "zeroprompt/rng.h"

namespace zeroprompt {

void EncoderConfig::validate() const {
  if (num_layers < 1) throw std::invalid_argument("config: num_layers must be >= 1");
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
    throw std::invalid_argument("config: d_model must be a positive multiple of n_heads");
  }
  if (ffn_dim < 1) throw std::invalid_argument("config: ffn_dim must be >= 1");
  if (vocab_size < 2) throw std::invalid_argument("config: vocab_size must be >= 2");
  if (feat_dim < 1) throw std::invalid_argument("config: feat_dim must be >= 1");
  if (frame_ms < 1) throw std::invalid_argument("config: frame_ms must be >= 1");
  if (subsample < 1) throw std::invalid_argument("config: subsample must be >= 1");
  if (chunk_frames < 1) throw std::invalid_argument("config: chunk_frames must be >= 1");
  if (chunk_frames % subsample != 0) {
    throw std::invalid_argument("config: chunk_frames must be a multiple of subsample");
  }
  if (left_chunks < -1) throw std::invalid_argument("config: left_chunks must be >= -1");
}

ZeroPromptSpec ZeroPromptSpec::normalized() const {
  if (zp_frames <= 0 || start_layer < 0) return disabled();
  return *this;
}

void ZeroPromptSpec::validate(const EncoderConfig& cfg) const {
  if (zp_frames < 0) throw std::invalid_argument("zero prompt: zp_frames must be >= 0");
  if (start_layer < -1 || start_layer >= cfg.num_layers) {
    throw std::invalid_argument("zero prompt: start_layer " + std::to_string(start_layer) +
                                " outside [-1, " + std::to_string(cfg.num_layers) + ")");
  }
  if (enabled() && zp_frames % cfg.subsample != 0) {
    throw std::invalid_argument("zero prompt: zp_frames must be a multiple of subsample");
  }
}

namespace {

void require_vec(const std::vector<float>& v, int n, const char* name) {
  if (static_cast<int>(v.size()) != n) {
    throw std::invalid_argument(std::string("weights: ") + name + " has " +
                                std::to_string(v.size()) + " entries, expected " +
                                std::to_string(n));
  }
}

void require_mat(const Matrix& m, int r, int c, const char* name) {
  if (m.rows != r || m.cols != c) {
    throw std::invalid_argument(std::string("weights: ") + name + " is " + m.shape_str() +
                                ", expected (" + std::to_string(r) + "x" +
                                std::to_string(c) + ")");
  }
}

}  // namespace

void EncoderWeights::validate(const EncoderConfig& cfg) const {
  const int d = cfg.d_model;
  require_mat(in_w, cfg.feat_dim * cfg.subsample, d, "in_w");
  require_vec(in_b, d, "in_b");
  if (static_cast<int>(layers.size()) != cfg.num_layers) {
    throw std::invalid_argument("weights: layer count mismatch");
  }
  for (const auto& l : layers) {
    require_mat(l.wq, d, d, "wq");
    require_mat(l.wk, d, d, "wk");
    require_mat(l.wv, d, d, "wv");
    require_mat(l.wo, d, d, "wo");
    require_vec(l.bq, d, "bq");
    require_vec(l.bk, d, "bk");
    require_vec(l.bv, d, "bv");
    require_vec(l.bo, d, "bo");
    require_vec(l.ln1_gamma, d, "ln1_gamma");
    require_vec(l.ln1_beta, d, "ln1_beta");
    require_vec(l.ln2_gamma, d, "ln2_gamma");
    require_vec(l.ln2_beta, d, "ln2_beta");
    require_mat(l.ffn_w1, d, cfg.ffn_dim, "ffn_w1");
    require_vec(l.ffn_b1, cfg.ffn_dim, "ffn_b1");
    require_mat(l.ffn_w2, cfg.ffn_dim, d, "ffn_w2");
    require_vec(l.ffn_b2, d, "ffn_b2");
  }
  require_mat(out_w, d, cfg.vocab_size, "out_w");
  require_vec(out_b, cfg.vocab_size, "out_b");
}

AttnMask build_chunk_mask(int n_cache, int n_real, int n_zp, int block) {
  if (block < 1) throw std::invalid_argument("mask: block must be >= 1");
  if (n_cache < 0 || n_real < 0 || n_zp < 0) {
    throw std::invalid_argument("mask: negative region size");
  }
  if (n_real == 0 && n_zp == 0) {
    throw std::invalid_argument("mask: no query rows");
  }
  AttnMask mask(n_real + n_zp, n_cache + n_real + n_zp);
  // Real queries: all cache and real columns, no zero-prompt column.
  for (int q = 0; q < n_real; ++q) {
    for (int c = 0; c < n_cache + n_real; ++c) mask.set(q, c, true);
  }
  // Prompt queries: cache + real, plus prompt columns through the end of
  // their own block.
  for (int j = 0; j < n_zp; ++j) {
    const int q = n_real + j;
    const int visible_zp = std::min((j / block + 1) * block, n_zp);
    for (int c = 0; c < n_cache + n_real + visible_zp; ++c) mask.set(q, c, true);
  }
  return mask;
}

namespace detail {

Matrix affine(const Matrix& x, const Matrix& w, const std::vector<float>& b) {
  Matrix out = matmul(x, w);
  if (static_cast<int>(b.size()) != out.cols) {
    throw std::invalid_argument("affine: bias length mismatch");
  }
  for (int i = 0; i < out.rows; ++i) {
    float* row = out.row(i);
    for (int j = 0; j < out.cols; ++j) row[j] += b[j];
  }
  return out;
}

Matrix vconcat(const Matrix& a, const Matrix& b) {
  if (a.rows == 0) return b;
  if (b.rows == 0) return a;
  if (a.cols != b.cols) throw std::invalid_argument("vconcat: column mismatch");
  Matrix out(a.rows + b.rows, a.cols);
  std::memcpy(out.data.data(), a.data.data(), a.data.size() * sizeof(float));
  std::memcpy(out.data.data() + a.data.size(), b.data.data(), b.data.size() * sizeof(float));
  return out;
}

Matrix top_rows(const Matrix& m, int n) {
  Matrix out(n, m.cols);
  std::memcpy(out.data.data(), m.data.data(), static_cast<size_t>(n) * m.cols * sizeof(float));
  return out;
}

Matrix bottom_rows(const Matrix& m, int n) {
  Matrix out(m.rows - n, m.cols);
  std::memcpy(out.data.data(), m.row(n),
              static_cast<size_t>(m.rows - n) * m.cols * sizeof(float));
  return out;
}

Matrix col_slice(const Matrix& m, int c0, int n) {
  Matrix out(m.rows, n);
  for (int i = 0; i < m.rows; ++i) {
    std::memcpy(out.row(i), m.row(i) + c0, static_cast<size_t>(n) * sizeof(float));
  }
  return out;
}

void add_inplace(Matrix* x, const Matrix& y) {
  if (!x->same_shape(y)) throw std::invalid_argument("add: shape mismatch");
  for (size_t i = 0; i < x->data.size(); ++i) x->data[i] += y.data[i];
}

Matrix layer_forward(const EncoderConfig& cfg, const LayerWeights& lw, const Matrix& x,
                     const Matrix& k_cache, const Matrix& v_cache, const AttnMask& mask,
                     Matrix* k_new, Matrix* v_new, LayerTape* tape) {
  const int d = cfg.d_model;
  const int dk = d / cfg.n_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dk));

  if (tape && k_cache.rows != 0) {
    throw std::logic_error("layer_forward: traced mode expects no cache");
  }
  if (tape) tape->x_in = x;

  Matrix ln1 = layer_norm_stats(x, lw.ln1_gamma, lw.ln1_beta, kLayerNormEps,
                                tape ? &tape->ln1_xhat : nullptr,
                                tape ? &tape->ln1_istd : nullptr);
  Matrix q = affine(ln1, lw.wq, lw.bq);
  Matrix k_cur = affine(ln1, lw.wk, lw.bk);
  Matrix v_cur = affine(ln1, lw.wv, lw.bv);
  Matrix k_all = vconcat(k_cache, k_cur);
  Matrix v_all = vconcat(v_cache, v_cur);
  if (tape) {
    tape->q = q;
    tape->k = k_all;
    tape->v = v_all;
    tape->head_probs.assign(cfg.n_heads, Matrix());
  }

  Matrix head_ctx(x.rows, d);
  for (int h = 0; h < cfg.n_heads; ++h) {
    Matrix qh = col_slice(q, h * dk, dk);
    Matrix kh = col_slice(k_all, h * dk, dk);
    Matrix vh = col_slice(v_all, h * dk, dk);
    Matrix ctx = masked_attention_probs(qh, kh, vh, mask, scale,
                                        tape ? &tape->head_probs[h] : nullptr);
    for (int i = 0; i < x.rows; ++i) {
      std::memcpy(head_ctx.row(i) + h * dk, ctx.row(i), static_cast<size_t>(dk) * sizeof(float));
    }
  }
  if (tape) tape->head_ctx = head_ctx;

  Matrix attn_out = affine(head_ctx, lw.wo, lw.bo);
  Matrix h_res = x;
  add_inplace(&h_res, attn_out);
  if (tape) tape->h = h_res;

  Matrix ln2 = layer_norm_stats(h_res, lw.ln2_gamma, lw.ln2_beta, kLayerNormEps,
                                tape ? &tape->ln2_xhat : nullptr,
                                tape ? &tape->ln2_istd : nullptr);
  Matrix z1 = affine(ln2, lw.ffn_w1, lw.ffn_b1);
  if (tape) tape->ffn_z1 = z1;
  for (float& v : z1.data) v = std::max(v, 0.0f);  // relu
  if (tape) tape->ffn_a1 = z1;
  Matrix ffn_out = affine(z1, lw.ffn_w2, lw.ffn_b2);
  Matrix y = h_res;
  add_inplace(&y, ffn_out);

  if (k_new) *k_new = std::move(k_cur);
  if (v_new) *v_new = std::move(v_cur);
  return y;
}

AttnMask offline_mask(int total_rows, int block, int left_chunks) {
  AttnMask mask(total_rows, total_rows);
  for (int i = 0; i < total_rows; ++i) {
    const int chunk = i / block;
    const int first = left_chunks < 0 ? 0 : std::max(0, (chunk - left_chunks) * block);
    const int last = std::min((chunk + 1) * block, total_rows);
    for (int c = first; c < last; ++c) mask.set(i, c, true);
  }
  return mask;
}

Matrix forward_full(const EncoderConfig& cfg, const EncoderWeights& w,
                    const Matrix& feats, EncoderTape* tape) {
  cfg.validate();
  w.validate(cfg);
  if (feats.rows < 1) throw std::invalid_argument("forward: empty feature matrix");
  if (feats.cols != cfg.feat_dim) {
    throw std::invalid_argument("forward: feature dim " + std::to_string(feats.cols) +
                                ", expected " + std::to_string(cfg.feat_dim));
  }
  Matrix stacked = stack_frames(feats, cfg.subsample);
  if (tape) tape->stacked = stacked;
  Matrix x = affine(stacked, w.in_w, w.in_b);
  add_inplace(&x, sinusoidal_positions(0, x.rows, cfg.d_model));
  if (tape) tape->x_emb = x;

  const AttnMask mask = offline_mask(x.rows, cfg.block_rows(), cfg.left_chunks);
  if (tape) {
    tape->mask = mask;
    tape->layers.assign(cfg.num_layers, LayerTape());
  }
  const Matrix empty;
  for (int l = 0; l < cfg.num_layers; ++l) {
    x = layer_forward(cfg, w.layers[l], x, empty, empty, mask, nullptr, nullptr,
                      tape ? &tape->layers[l] : nullptr);
  }
  if (tape) tape->x_final = x;
  Matrix logits = affine(x, w.out_w, w.out_b);
  if (tape) tape->logits = logits;
  Matrix logprobs = log_softmax(logits);
  if (tape) tape->logprobs = logprobs;
  return logprobs;
}

}  // namespace detail

Matrix stack_frames(const Matrix& feats, int subsample) {
  if (subsample <= 1) return feats;
  const int groups = (feats.rows + subsample - 1) / subsample;
  Matrix out(groups, feats.cols * subsample);
  for (int g = 0; g < groups; ++g) {
    for (int s = 0; s < subsample; ++s) {
      const int src = g * subsample + s;
      if (src >= feats.rows) break;  // trailing partial group stays zero-padded
      std::memcpy(out.row(g) + static_cast<size_t>(s) * feats.cols, feats.row(src),
                  static_cast<size_t>(feats.cols) * sizeof(float));
    }
  }
  return out;
}

Matrix sinusoidal_positions(int64_t first, int n, int d_model) {
  Matrix out(n, d_model);
  for (int i = 0; i < n; ++i) {
    const double pos = static_cast<double>(first + i);
    float* row = out.row(i);
    for (int j = 0; j < d_model / 2; ++j) {
      const double rate = std::pow(10000.0, -2.0 * j / d_model);
      row[2 * j] = static_cast<float>(std::sin(pos * rate));
      row[2 * j + 1] = static_cast<float>(std::cos(pos * rate));
    }
  }
  return out;
}

namespace {

void validate_cache(const EncoderConfig& cfg, const AttentionCache& cache) {
  if (cache.empty()) return;
  if (static_cast<int>(cache.k.size()) != cfg.num_layers ||
      static_cast<int>(cache.v.size()) != cfg.num_layers) {
    throw std::invalid_argument("cache: layer count does not match config");
  }
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (cache.k[l].rows != cache.v[l].rows || cache.k[l].rows != cache.k[0].rows) {
      throw std::invalid_argument("cache: inconsistent row counts");
    }
    if (cache.k[l].rows > 0 && (cache.k[l].cols != cfg.d_model || cache.v[l].cols != cfg.d_model)) {
      throw std::invalid_argument("cache: width does not match d_model");
    }
  }
}

// Keep the trailing `bound` rows (all rows when bound < 0).
Matrix trim_rows(const Matrix& m, int bound) {
  if (bound < 0 || m.rows <= bound) return m;
  return detail::bottom_rows(m, m.rows - bound);
}

}  // namespace

ChunkOutput forward_chunk(const EncoderConfig& cfg, const EncoderWeights& w,
                          const AttentionCache& cache, const Matrix& real_feats,
                          const ZeroPromptSpec& zp_in) {
  cfg.validate();
  w.validate(cfg);
  validate_cache(cfg, cache);
  const ZeroPromptSpec zp = zp_in.normalized();
  zp.validate(cfg);
  if (real_feats.rows < 1) throw std::invalid_argument("forward_chunk: empty chunk");
  if (real_feats.cols != cfg.feat_dim) {
    throw std::invalid_argument("forward_chunk: feature dim " +
                                std::to_string(real_feats.cols) + ", expected " +
                                std::to_string(cfg.feat_dim));
  }

  Matrix stacked = stack_frames(real_feats, cfg.subsample);
  const int n_real = stacked.rows;
  const int zp_rows = zp.enabled() ? zp.zp_frames / cfg.subsample : 0;
  const int block = cfg.block_rows();
  const int start_layer = zp.enabled() ? zp.start_layer : -1;

  // start_layer 0: the prompt enters as zeroed frames ahead of the input
  // projection, picking up the projection bias and continued positions.
  if (start_layer == 0 && zp_rows > 0) {
    stacked = detail::vconcat(stacked, Matrix(zp_rows, stacked.cols));
  }
  Matrix x = detail::affine(stacked, w.in_w, w.in_b);
  detail::add_inplace(&x, sinusoidal_positions(cache.rows_consumed, x.rows, cfg.d_model));

  ChunkOutput out;
  out.cache.k.assign(cfg.num_layers, Matrix());
  out.cache.v.assign(cfg.num_layers, Matrix());
  const int bound = cfg.left_chunks < 0 ? -1 : cfg.left_chunks * block;
  const Matrix empty;

  for (int l = 0; l < cfg.num_layers; ++l) {
    // start_layer >= 1: zero-valued hidden rows join at this layer's input;
    // layers below did no prompt computation at all.
    if (zp_rows > 0 && l == start_layer && start_layer >= 1) {
      x = detail::vconcat(x, Matrix(zp_rows, cfg.d_model));
    }
    const int active_zp = (start_layer >= 0 && l >= start_layer) ? zp_rows : 0;
    const Matrix& k_cache = cache.empty() ? empty : cache.k[l];
    const Matrix& v_cache = cache.empty() ? empty : cache.v[l];
    const AttnMask mask = build_chunk_mask(k_cache.rows, n_real, active_zp, block);
    Matrix k_cur, v_cur;
    x = detail::layer_forward(cfg, w.layers[l], x, k_cache, v_cache, mask, &k_cur, &v_cur,
                              nullptr);
    // Only real rows ever enter the cache.
    out.cache.k[l] = trim_rows(detail::vconcat(k_cache, detail::top_rows(k_cur, n_real)), bound);
    out.cache.v[l] = trim_rows(detail::vconcat(v_cache, detail::top_rows(v_cur, n_real)), bound);
  }

  Matrix logits = detail::affine(x, w.out_w, w.out_b);
  Matrix logprobs = log_softmax(logits);
  out.logprobs_real = detail::top_rows(logprobs, n_real);
  out.logprobs_zp = logprobs.rows > n_real ? detail::bottom_rows(logprobs, n_real)
                                           : Matrix(0, cfg.vocab_size);
  out.cache.rows_consumed = cache.rows_consumed + n_real;
  return out;
}

Matrix forward_offline(const EncoderConfig& cfg, const EncoderWeights& w,
                       const Matrix& feats) {
  return detail::forward_full(cfg, w, feats, nullptr);
}

EncoderWeights init_weights(const EncoderConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto fill_mat = [&rng](Matrix& m, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& v : m.data) v = static_cast<float>(rng.uniform(-s, s));
  };
  EncoderWeights w;
  const int d = cfg.d_model;
  w.in_w = Matrix(cfg.feat_dim * cfg.subsample, d);
  fill_mat(w.in_w, cfg.feat_dim * cfg.subsample);
  w.in_b.assign(d, 0.0f);
  w.layers.resize(cfg.num_layers);
  for (auto& l : w.layers) {
    for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo}) {
      *m = Matrix(d, d);
      fill_mat(*m, d);
    }
    l.bq.assign(d, 0.0f);
    l.bk.assign(d, 0.0f);
    l.bv.assign(d, 0.0f);
    l.bo.assign(d, 0.0f);
    l.ln1_gamma.assign(d, 1.0f);
    l.ln1_beta.assign(d, 0.0f);
    l.ln2_gamma.assign(d, 1.0f);
    l.ln2_beta.assign(d, 0.0f);
    l.ffn_w1 = Matrix(d, cfg.ffn_dim);
    fill_mat(l.ffn_w1, d);
    l.ffn_b1.assign(cfg.ffn_dim, 0.0f);
    l.ffn_w2 = Matrix(cfg.ffn_dim, d);
    fill_mat(l.ffn_w2, cfg.ffn_dim);
    l.ffn_b2.assign(d, 0.0f);
  }
  w.out_w = Matrix(d, cfg.vocab_size);
  fill_mat(w.out_w, d);
  w.out_b.assign(cfg.vocab_size, 0.0f);
  return w;
}

}  // namespace zeroprompt
