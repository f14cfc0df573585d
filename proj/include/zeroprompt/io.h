// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_IO_H_
#define ZEROPROMPT_IO_H_

#include <string>
#include <vector>

#include "zeroprompt/ctc.h"
#include "zeroprompt/encoder.h"
#include "zeroprompt/matrix.h"

namespace zeroprompt {

// Model file: a human-readable text header (format version, config fields,
// named tensor directory with shapes and byte offsets) terminated by "end",
// followed by raw little-endian float32 tensor data in directory order.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

struct Utterance {
  std::string id;
  TokenSeq reference;  // never contains blank
  Matrix feats;        // frames x feat_dim
};

struct Corpus {
  int frame_ms = 10;
  int feat_dim = 0;
  std::vector<Utterance> utts;
};

// Corpus file: same text-header-plus-raw-float32 layout; one directory line
// per utterance carrying its id, reference token ids and feature shape.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace zeroprompt

#endif  // ZEROPROMPT_IO_H_
