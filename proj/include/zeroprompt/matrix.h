// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_MATRIX_H_
#define ZEROPROMPT_MATRIX_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace zeroprompt {

// Dense row-major float32 matrix. The single numeric carrier used for
// features, hidden states and log-probabilities.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }

  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

// Boolean attention mask: allowed(q, k) says whether query row q may attend
// to key column k. Stored as one byte per cell.
struct AttnMask {
  int n_query = 0;
  int n_key = 0;
  std::vector<uint8_t> allowed;  // n_query * n_key

  AttnMask() = default;
  AttnMask(int nq, int nk, bool value = false)
      : n_query(nq), n_key(nk), allowed(static_cast<size_t>(nq) * nk, value ? 1 : 0) {}

  bool at(int q, int k) const { return allowed[static_cast<size_t>(q) * n_key + k] != 0; }
  void set(int q, int k, bool v) { allowed[static_cast<size_t>(q) * n_key + k] = v ? 1 : 0; }
};

}  // namespace zeroprompt

#endif  // ZEROPROMPT_MATRIX_H_
