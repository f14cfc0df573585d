// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include "zeroprompt/linalg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace zeroprompt {

void check_finite(const Matrix& m, const char* what) {
  for (float v : m.data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(what) + ": non-finite value in output " +
                               m.shape_str());
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " x " +
                                b.shape_str());
  }
  Matrix out(a.rows, b.cols);
  // i-k-j order with a float32 accumulator row; the fixed order makes
  // repeated runs bit-identical.
  for (int i = 0; i < a.rows; ++i) {
    float* out_row = out.row(i);
    const float* a_row = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const float aik = a_row[k];
      const float* b_row = b.row(k);
      for (int j = 0; j < b.cols; ++j) {
        out_row[j] += aik * b_row[j];
      }
    }
  }
  check_finite(out, "matmul");
  return out;
}

Matrix masked_attention_probs(const Matrix& q, const Matrix& k, const Matrix& v,
                              const AttnMask& mask, float scale, Matrix* probs) {
  if (q.cols != k.cols) {
    throw std::invalid_argument("masked_attention: q/k dim mismatch " + q.shape_str() +
                                " vs " + k.shape_str());
  }
  if (k.rows != v.rows) {
    throw std::invalid_argument("masked_attention: k/v row mismatch " + k.shape_str() +
                                " vs " + v.shape_str());
  }
  if (mask.n_query != q.rows || mask.n_key != k.rows) {
    throw std::invalid_argument("masked_attention: mask shape (" +
                                std::to_string(mask.n_query) + "x" +
                                std::to_string(mask.n_key) + ") does not match q " +
                                q.shape_str() + " / k " + k.shape_str());
  }
  Matrix out(q.rows, v.cols);
  if (probs) *probs = Matrix(q.rows, k.rows);
  std::vector<float> logits(k.rows);
  for (int i = 0; i < q.rows; ++i) {
    // Logits for allowed keys only; masked keys are never touched.
    float max_logit = -std::numeric_limits<float>::infinity();
    int n_allowed = 0;
    for (int j = 0; j < k.rows; ++j) {
      if (!mask.at(i, j)) continue;
      float dot = 0.0f;
      const float* q_row = q.row(i);
      const float* k_row = k.row(j);
      for (int d = 0; d < q.cols; ++d) dot += q_row[d] * k_row[d];
      dot *= scale;
      logits[j] = dot;
      if (dot > max_logit) max_logit = dot;
      ++n_allowed;
    }
    if (n_allowed == 0) {
      throw std::runtime_error("masked_attention: fully masked query row " +
                               std::to_string(i));
    }
    float denom = 0.0f;
    for (int j = 0; j < k.rows; ++j) {
      if (mask.at(i, j)) denom += std::exp(logits[j] - max_logit);
    }
    float* out_row = out.row(i);
    for (int j = 0; j < k.rows; ++j) {
      if (!mask.at(i, j)) continue;
      const float w = std::exp(logits[j] - max_logit) / denom;
      if (probs) probs->at(i, j) = w;
      const float* v_row = v.row(j);
      for (int d = 0; d < v.cols; ++d) out_row[d] += w * v_row[d];
    }
  }
  check_finite(out, "masked_attention");
  return out;
}

Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        const AttnMask& mask, float scale) {
  return masked_attention_probs(q, k, v, mask, scale, nullptr);
}

Matrix layer_norm_stats(const Matrix& x, const std::vector<float>& gamma,
                        const std::vector<float>& beta, float eps,
                        Matrix* normalized, std::vector<float>* inv_std) {
  if (static_cast<int>(gamma.size()) != x.cols || static_cast<int>(beta.size()) != x.cols) {
    throw std::invalid_argument("layer_norm: gamma/beta length " +
                                std::to_string(gamma.size()) + "/" +
                                std::to_string(beta.size()) + " vs cols " +
                                std::to_string(x.cols));
  }
  if (eps <= 0.0f) throw std::invalid_argument("layer_norm: eps must be > 0");
  Matrix out(x.rows, x.cols);
  if (normalized) *normalized = Matrix(x.rows, x.cols);
  if (inv_std) inv_std->assign(x.rows, 0.0f);
  for (int i = 0; i < x.rows; ++i) {
    const float* row = x.row(i);
    float mean = 0.0f;
    for (int j = 0; j < x.cols; ++j) mean += row[j];
    mean /= static_cast<float>(x.cols);
    float var = 0.0f;
    for (int j = 0; j < x.cols; ++j) {
      const float d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<float>(x.cols);
    const float istd = 1.0f / std::sqrt(var + eps);
    if (inv_std) (*inv_std)[i] = istd;
    float* out_row = out.row(i);
    for (int j = 0; j < x.cols; ++j) {
      const float xhat = (row[j] - mean) * istd;
      if (normalized) normalized->at(i, j) = xhat;
      out_row[j] = xhat * gamma[j] + beta[j];
    }
  }
  check_finite(out, "layer_norm");
  return out;
}

Matrix layer_norm(const Matrix& x, const std::vector<float>& gamma,
                  const std::vector<float>& beta, float eps) {
  return layer_norm_stats(x, gamma, beta, eps, nullptr, nullptr);
}

Matrix log_softmax(const Matrix& x) {
  Matrix out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    const float* row = x.row(i);
    float max_v = -std::numeric_limits<float>::infinity();
    for (int j = 0; j < x.cols; ++j) max_v = std::max(max_v, row[j]);
    float sum = 0.0f;
    for (int j = 0; j < x.cols; ++j) sum += std::exp(row[j] - max_v);
    const float lse = max_v + std::log(sum);
    float* out_row = out.row(i);
    for (int j = 0; j < x.cols; ++j) out_row[j] = row[j] - lse;
  }
  check_finite(out, "log_softmax");
  return out;
}

}  // namespace zeroprompt
