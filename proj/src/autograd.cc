// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include "autograd.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "zeroprompt/linalg.h"

namespace zeroprompt::detail {

namespace {

// a (n x m) * b^T (m x k rows) -> n x k; fixed loop order.
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: shape mismatch");
  Matrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const float* a_row = a.row(i);
    float* out_row = out.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const float* b_row = b.row(j);
      float acc = 0.0f;
      for (int k = 0; k < a.cols; ++k) acc += a_row[k] * b_row[k];
      out_row[j] = acc;
    }
  }
  return out;
}

// a^T (rows x n) * b (rows x k) -> n x k.
Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: shape mismatch");
  Matrix out(a.cols, b.cols);
  for (int r = 0; r < a.rows; ++r) {
    const float* a_row = a.row(r);
    const float* b_row = b.row(r);
    for (int i = 0; i < a.cols; ++i) {
      const float ai = a_row[i];
      float* out_row = out.row(i);
      for (int j = 0; j < b.cols; ++j) out_row[j] += ai * b_row[j];
    }
  }
  return out;
}

std::vector<float> col_sum(const Matrix& m) {
  std::vector<float> out(m.cols, 0.0f);
  for (int i = 0; i < m.rows; ++i) {
    const float* row = m.row(i);
    for (int j = 0; j < m.cols; ++j) out[j] += row[j];
  }
  return out;
}

void add_vec(std::vector<float>* into, const std::vector<float>& v) {
  for (size_t i = 0; i < into->size(); ++i) (*into)[i] += v[i];
}

// Rebuild a layer-norm output from its recorded normalized rows.
Matrix ln_out_from_xhat(const Matrix& xhat, const std::vector<float>& gamma,
                        const std::vector<float>& beta) {
  Matrix out(xhat.rows, xhat.cols);
  for (int i = 0; i < xhat.rows; ++i) {
    const float* x_row = xhat.row(i);
    float* o_row = out.row(i);
    for (int j = 0; j < xhat.cols; ++j) o_row[j] = x_row[j] * gamma[j] + beta[j];
  }
  return out;
}

// Backward of y = xhat * gamma + beta. Adds into dgamma/dbeta and returns
// d loss / d x.
Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat,
                           const std::vector<float>& istd, const std::vector<float>& gamma,
                           std::vector<float>* dgamma, std::vector<float>* dbeta) {
  const int n = dy.cols;
  Matrix dx(dy.rows, dy.cols);
  for (int i = 0; i < dy.rows; ++i) {
    const float* dy_row = dy.row(i);
    const float* xh_row = xhat.row(i);
    float mean_dxhat = 0.0f;
    float mean_dxhat_xhat = 0.0f;
    for (int j = 0; j < n; ++j) {
      (*dgamma)[j] += dy_row[j] * xh_row[j];
      (*dbeta)[j] += dy_row[j];
      const float dxhat = dy_row[j] * gamma[j];
      mean_dxhat += dxhat;
      mean_dxhat_xhat += dxhat * xh_row[j];
    }
    mean_dxhat /= static_cast<float>(n);
    mean_dxhat_xhat /= static_cast<float>(n);
    float* dx_row = dx.row(i);
    for (int j = 0; j < n; ++j) {
      const float dxhat = dy_row[j] * gamma[j];
      dx_row[j] = istd[i] * (dxhat - mean_dxhat - xh_row[j] * mean_dxhat_xhat);
    }
  }
  return dx;
}

}  // namespace

EncoderWeights make_zero_weights(const EncoderConfig& cfg) {
  EncoderWeights w;
  const int d = cfg.d_model;
  w.in_w = Matrix(cfg.feat_dim * cfg.subsample, d);
  w.in_b.assign(d, 0.0f);
  w.layers.resize(cfg.num_layers);
  for (auto& l : w.layers) {
    l.wq = Matrix(d, d);
    l.wk = Matrix(d, d);
    l.wv = Matrix(d, d);
    l.wo = Matrix(d, d);
    l.bq.assign(d, 0.0f);
    l.bk.assign(d, 0.0f);
    l.bv.assign(d, 0.0f);
    l.bo.assign(d, 0.0f);
    l.ln1_gamma.assign(d, 0.0f);
    l.ln1_beta.assign(d, 0.0f);
    l.ln2_gamma.assign(d, 0.0f);
    l.ln2_beta.assign(d, 0.0f);
    l.ffn_w1 = Matrix(d, cfg.ffn_dim);
    l.ffn_b1.assign(cfg.ffn_dim, 0.0f);
    l.ffn_w2 = Matrix(cfg.ffn_dim, d);
    l.ffn_b2.assign(d, 0.0f);
  }
  w.out_w = Matrix(d, cfg.vocab_size);
  w.out_b.assign(cfg.vocab_size, 0.0f);
  return w;
}

Matrix forward_traced(const EncoderConfig& cfg, const EncoderWeights& w,
                      const Matrix& feats, EncoderTape* tape) {
  return forward_full(cfg, w, feats, tape);
}

EncoderWeights encoder_backward(const EncoderConfig& cfg, const EncoderWeights& w,
                                const EncoderTape& tape, const Matrix& dlogits) {
  EncoderWeights g = make_zero_weights(cfg);
  const int d = cfg.d_model;
  const int dk = d / cfg.n_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dk));

  // Output projection: logits = x_final * out_w + out_b.
  g.out_w = matmul_tn(tape.x_final, dlogits);
  g.out_b = col_sum(dlogits);
  Matrix dx = matmul_nt(dlogits, w.out_w);

  for (int l = cfg.num_layers - 1; l >= 0; --l) {
    const LayerWeights& lw = w.layers[l];
    LayerWeights& lg = g.layers[l];
    const LayerTape& lt = tape.layers[l];
    const int n = lt.x_in.rows;

    // y = h + ffn(ln2(h))
    Matrix d_ffn_out = dx;  // residual: dx also flows to h directly
    Matrix ln2_out = ln_out_from_xhat(lt.ln2_xhat, lw.ln2_gamma, lw.ln2_beta);
    Matrix d_a1 = matmul_nt(d_ffn_out, lw.ffn_w2);
    {
      Matrix gw2 = matmul_tn(lt.ffn_a1, d_ffn_out);
      for (size_t i = 0; i < gw2.data.size(); ++i) lg.ffn_w2.data[i] += gw2.data[i];
      add_vec(&lg.ffn_b2, col_sum(d_ffn_out));
    }
    for (size_t i = 0; i < d_a1.data.size(); ++i) {
      if (lt.ffn_z1.data[i] <= 0.0f) d_a1.data[i] = 0.0f;  // relu backward
    }
    {
      Matrix gw1 = matmul_tn(ln2_out, d_a1);
      for (size_t i = 0; i < gw1.data.size(); ++i) lg.ffn_w1.data[i] += gw1.data[i];
      add_vec(&lg.ffn_b1, col_sum(d_a1));
    }
    Matrix d_ln2 = matmul_nt(d_a1, lw.ffn_w1);
    Matrix dh = layer_norm_backward(d_ln2, lt.ln2_xhat, lt.ln2_istd, lw.ln2_gamma,
                                    &lg.ln2_gamma, &lg.ln2_beta);
    add_inplace(&dh, dx);  // residual path

    // h = x_in + wo(head_ctx) + bo
    Matrix d_head_ctx = matmul_nt(dh, lw.wo);
    {
      Matrix gwo = matmul_tn(lt.head_ctx, dh);
      for (size_t i = 0; i < gwo.data.size(); ++i) lg.wo.data[i] += gwo.data[i];
      add_vec(&lg.bo, col_sum(dh));
    }

    Matrix dq(n, d), dk_all(n, d), dv_all(n, d);
    for (int h = 0; h < cfg.n_heads; ++h) {
      const Matrix& probs = lt.head_probs[h];  // n x n, zero at masked cells
      Matrix d_ctx = col_slice(d_head_ctx, h * dk, dk);
      Matrix vh = col_slice(lt.v, h * dk, dk);
      Matrix kh = col_slice(lt.k, h * dk, dk);
      Matrix qh = col_slice(lt.q, h * dk, dk);
      Matrix d_probs = matmul_nt(d_ctx, vh);           // n x n
      Matrix d_vh = matmul_tn(probs, d_ctx);           // n x dk
      // Softmax backward row-wise; masked cells carry probs == 0 so they
      // contribute nothing and receive zero score gradient.
      Matrix d_scores(n, n);
      for (int i = 0; i < n; ++i) {
        const float* p_row = probs.row(i);
        const float* dp_row = d_probs.row(i);
        float dot = 0.0f;
        for (int j = 0; j < n; ++j) dot += p_row[j] * dp_row[j];
        float* ds_row = d_scores.row(i);
        for (int j = 0; j < n; ++j) ds_row[j] = p_row[j] * (dp_row[j] - dot);
      }
      Matrix d_qh = matmul(d_scores, kh);
      Matrix d_kh = matmul_tn(d_scores, qh);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dk; ++j) {
          dq.at(i, h * dk + j) = d_qh.at(i, j) * scale;
          dk_all.at(i, h * dk + j) = d_kh.at(i, j) * scale;
          dv_all.at(i, h * dk + j) = d_vh.at(i, j);
        }
      }
    }

    // q/k/v = ln1_out * w + b
    Matrix ln1_out = ln_out_from_xhat(lt.ln1_xhat, lw.ln1_gamma, lw.ln1_beta);
    Matrix d_ln1 = matmul_nt(dq, lw.wq);
    add_inplace(&d_ln1, matmul_nt(dk_all, lw.wk));
    add_inplace(&d_ln1, matmul_nt(dv_all, lw.wv));
    {
      Matrix gwq = matmul_tn(ln1_out, dq);
      Matrix gwk = matmul_tn(ln1_out, dk_all);
      Matrix gwv = matmul_tn(ln1_out, dv_all);
      for (size_t i = 0; i < gwq.data.size(); ++i) {
        lg.wq.data[i] += gwq.data[i];
        lg.wk.data[i] += gwk.data[i];
        lg.wv.data[i] += gwv.data[i];
      }
      add_vec(&lg.bq, col_sum(dq));
      add_vec(&lg.bk, col_sum(dk_all));
      add_vec(&lg.bv, col_sum(dv_all));
    }
    Matrix d_x = layer_norm_backward(d_ln1, lt.ln1_xhat, lt.ln1_istd, lw.ln1_gamma,
                                     &lg.ln1_gamma, &lg.ln1_beta);
    add_inplace(&d_x, dh);  // residual path into the layer input
    dx = std::move(d_x);
  }

  // x_emb = stacked * in_w + in_b (+ positions, parameter-free)
  g.in_w = matmul_tn(tape.stacked, dx);
  g.in_b = col_sum(dx);
  return g;
}

ParamViews param_views(EncoderWeights& w) {
  ParamViews v;
  v.mats.push_back(&w.in_w);
  v.vecs.push_back(&w.in_b);
  for (auto& l : w.layers) {
    for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.ffn_w1, &l.ffn_w2}) v.mats.push_back(m);
    for (std::vector<float>* b :
         {&l.bq, &l.bk, &l.bv, &l.bo, &l.ln1_gamma, &l.ln1_beta, &l.ln2_gamma, &l.ln2_beta,
          &l.ffn_b1, &l.ffn_b2}) {
      v.vecs.push_back(b);
    }
  }
  v.mats.push_back(&w.out_w);
  v.vecs.push_back(&w.out_b);
  return v;
}

void accumulate(EncoderWeights* into, const EncoderWeights& grads) {
  ParamViews a = param_views(*into);
  ParamViews b = param_views(const_cast<EncoderWeights&>(grads));
  for (size_t i = 0; i < a.mats.size(); ++i) {
    for (size_t j = 0; j < a.mats[i]->data.size(); ++j) {
      a.mats[i]->data[j] += b.mats[i]->data[j];
    }
  }
  for (size_t i = 0; i < a.vecs.size(); ++i) {
    for (size_t j = 0; j < a.vecs[i]->size(); ++j) (*a.vecs[i])[j] += (*b.vecs[i])[j];
  }
}

double grad_global_norm(const EncoderWeights& grads) {
  ParamViews v = param_views(const_cast<EncoderWeights&>(grads));
  double sq = 0.0;
  for (const Matrix* m : v.mats) {
    for (float x : m->data) sq += static_cast<double>(x) * x;
  }
  for (const std::vector<float>* b : v.vecs) {
    for (float x : *b) sq += static_cast<double>(x) * x;
  }
  return std::sqrt(sq);
}

void scale_weights(EncoderWeights* w, float s) {
  ParamViews v = param_views(*w);
  for (Matrix* m : v.mats) {
    for (float& x : m->data) x *= s;
  }
  for (std::vector<float>* b : v.vecs) {
    for (float& x : *b) x *= s;
  }
}

void sgd_step(EncoderWeights* w, const EncoderWeights& grads, float lr) {
  ParamViews a = param_views(*w);
  ParamViews b = param_views(const_cast<EncoderWeights&>(grads));
  for (size_t i = 0; i < a.mats.size(); ++i) {
    for (size_t j = 0; j < a.mats[i]->data.size(); ++j) {
      a.mats[i]->data[j] -= lr * b.mats[i]->data[j];
    }
  }
  for (size_t i = 0; i < a.vecs.size(); ++i) {
    for (size_t j = 0; j < a.vecs[i]->size(); ++j) (*a.vecs[i])[j] -= lr * (*b.vecs[i])[j];
  }
}

}  // namespace zeroprompt::detail
