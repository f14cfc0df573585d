// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zeroprompt/io.h"

namespace zeroprompt {

namespace {

constexpr const char* kModelMagic = "zeroprompt-model";
constexpr const char* kCorpusMagic = "zeroprompt-corpus";
constexpr int kFormatVersion = 1;

void write_f32_le(std::ostream& os, const float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff),
                           static_cast<char>((bits >> 24) & 0xff)};
    os.write(bytes, 4);
  }
}

void read_f32_le(std::istream& is, float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    if (!is) throw std::runtime_error("model io: truncated tensor data");
    const uint32_t bits = static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
                          (static_cast<uint32_t>(bytes[2]) << 16) |
                          (static_cast<uint32_t>(bytes[3]) << 24);
    std::memcpy(&data[i], &bits, 4);
  }
}

struct TensorRef {
  std::string name;
  const float* data;
  size_t count;
  std::vector<int> shape;
};

// Directory order is the serialization order; loaders rebuild by name.
std::vector<TensorRef> tensor_directory(const Model& model) {
  std::vector<TensorRef> dir;
  auto add_mat = [&dir](const std::string& name, const Matrix& m) {
    dir.push_back({name, m.data.data(), m.data.size(), {m.rows, m.cols}});
  };
  auto add_vec = [&dir](const std::string& name, const std::vector<float>& v) {
    dir.push_back({name, v.data(), v.size(), {static_cast<int>(v.size())}});
  };
  add_mat("in.w", model.weights.in_w);
  add_vec("in.b", model.weights.in_b);
  for (size_t l = 0; l < model.weights.layers.size(); ++l) {
    const auto& lw = model.weights.layers[l];
    const std::string p = "enc." + std::to_string(l) + ".";
    add_mat(p + "wq", lw.wq);
    add_vec(p + "bq", lw.bq);
    add_mat(p + "wk", lw.wk);
    add_vec(p + "bk", lw.bk);
    add_mat(p + "wv", lw.wv);
    add_vec(p + "bv", lw.bv);
    add_mat(p + "wo", lw.wo);
    add_vec(p + "bo", lw.bo);
    add_vec(p + "ln1.gamma", lw.ln1_gamma);
    add_vec(p + "ln1.beta", lw.ln1_beta);
    add_vec(p + "ln2.gamma", lw.ln2_gamma);
    add_vec(p + "ln2.beta", lw.ln2_beta);
    add_mat(p + "ffn.w1", lw.ffn_w1);
    add_vec(p + "ffn.b1", lw.ffn_b1);
    add_mat(p + "ffn.w2", lw.ffn_w2);
    add_vec(p + "ffn.b2", lw.ffn_b2);
  }
  add_mat("out.w", model.weights.out_w);
  add_vec("out.b", model.weights.out_b);
  return dir;
}

std::string expect_line(std::istream& is, const char* ctx) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error(std::string("model io: unexpected end of header (") + ctx + ")");
  }
  return line;
}

long parse_field(const std::string& line, const std::string& key) {
  std::istringstream ss(line);
  std::string name;
  long value;
  if (!(ss >> name >> value) || name != key) {
    throw std::runtime_error("model io: expected '" + key + " <value>', got '" + line + "'");
  }
  return value;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  model.cfg.validate();
  model.weights.validate(model.cfg);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("model io: cannot open " + path + " for writing");
  const auto dir = tensor_directory(model);
  const auto& c = model.cfg;
  os << kModelMagic << " " << kFormatVersion << "\n";
  os << "num_layers " << c.num_layers << "\n";
  os << "d_model " << c.d_model << "\n";
  os << "n_heads " << c.n_heads << "\n";
  os << "ffn_dim " << c.ffn_dim << "\n";
  os << "vocab_size " << c.vocab_size << "\n";
  os << "feat_dim " << c.feat_dim << "\n";
  os << "frame_ms " << c.frame_ms << "\n";
  os << "subsample " << c.subsample << "\n";
  os << "chunk_frames " << c.chunk_frames << "\n";
  os << "left_chunks " << c.left_chunks << "\n";
  os << "tensors " << dir.size() << "\n";
  size_t offset = 0;
  for (const auto& t : dir) {
    os << "tensor " << t.name << " " << t.shape.size();
    for (int d : t.shape) os << " " << d;
    os << " " << offset << "\n";
    offset += t.count * 4;
  }
  os << "end\n";
  for (const auto& t : dir) write_f32_le(os, t.data, t.count);
  if (!os) throw std::runtime_error("model io: write failed for " + path);
}

Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("model io: cannot open " + path);
  {
    std::istringstream ss(expect_line(is, "magic"));
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != kModelMagic) throw std::runtime_error("model io: bad magic in " + path);
    if (version != kFormatVersion) {
      throw std::runtime_error("model io: unsupported format version " +
                               std::to_string(version));
    }
  }
  Model model;
  EncoderConfig& c = model.cfg;
  c.num_layers = static_cast<int>(parse_field(expect_line(is, "num_layers"), "num_layers"));
  c.d_model = static_cast<int>(parse_field(expect_line(is, "d_model"), "d_model"));
  c.n_heads = static_cast<int>(parse_field(expect_line(is, "n_heads"), "n_heads"));
  c.ffn_dim = static_cast<int>(parse_field(expect_line(is, "ffn_dim"), "ffn_dim"));
  c.vocab_size = static_cast<int>(parse_field(expect_line(is, "vocab_size"), "vocab_size"));
  c.feat_dim = static_cast<int>(parse_field(expect_line(is, "feat_dim"), "feat_dim"));
  c.frame_ms = static_cast<int>(parse_field(expect_line(is, "frame_ms"), "frame_ms"));
  c.subsample = static_cast<int>(parse_field(expect_line(is, "subsample"), "subsample"));
  c.chunk_frames = static_cast<int>(parse_field(expect_line(is, "chunk_frames"), "chunk_frames"));
  c.left_chunks = static_cast<int>(parse_field(expect_line(is, "left_chunks"), "left_chunks"));
  c.validate();

  const long n_tensors = parse_field(expect_line(is, "tensors"), "tensors");
  struct Entry {
    std::string name;
    std::vector<int> shape;
    size_t offset;
    size_t count;
  };
  std::vector<Entry> entries;
  for (long i = 0; i < n_tensors; ++i) {
    std::istringstream ss(expect_line(is, "tensor"));
    std::string tag, name;
    int ndims = 0;
    ss >> tag >> name >> ndims;
    if (tag != "tensor" || ndims < 1 || ndims > 2) {
      throw std::runtime_error("model io: bad tensor line");
    }
    Entry e;
    e.name = name;
    e.count = 1;
    for (int dj = 0; dj < ndims; ++dj) {
      int dim = 0;
      ss >> dim;
      e.shape.push_back(dim);
      e.count *= static_cast<size_t>(dim);
    }
    ss >> e.offset;
    if (!ss) throw std::runtime_error("model io: bad tensor line for " + name);
    entries.push_back(std::move(e));
  }
  if (expect_line(is, "end") != "end") throw std::runtime_error("model io: missing end marker");

  const std::streampos data_start = is.tellg();
  model.weights = [&] {
    EncoderWeights w;
    w.layers.resize(c.num_layers);
    return w;
  }();

  auto load_entry = [&](const Entry& e) {
    is.seekg(data_start + static_cast<std::streamoff>(e.offset));
    std::vector<float> buf(e.count);
    read_f32_le(is, buf.data(), e.count);
    return buf;
  };
  auto find_entry = [&](const std::string& name) -> const Entry& {
    for (const auto& e : entries) {
      if (e.name == name) return e;
    }
    throw std::runtime_error("model io: missing tensor " + name);
  };
  auto load_mat = [&](const std::string& name) {
    const Entry& e = find_entry(name);
    if (e.shape.size() != 2) throw std::runtime_error("model io: " + name + " is not 2-d");
    Matrix m(e.shape[0], e.shape[1]);
    m.data = load_entry(e);
    return m;
  };
  auto load_vec = [&](const std::string& name) {
    const Entry& e = find_entry(name);
    if (e.shape.size() != 1) throw std::runtime_error("model io: " + name + " is not 1-d");
    return load_entry(e);
  };

  EncoderWeights& w = model.weights;
  w.in_w = load_mat("in.w");
  w.in_b = load_vec("in.b");
  for (int l = 0; l < c.num_layers; ++l) {
    auto& lw = w.layers[l];
    const std::string p = "enc." + std::to_string(l) + ".";
    lw.wq = load_mat(p + "wq");
    lw.bq = load_vec(p + "bq");
    lw.wk = load_mat(p + "wk");
    lw.bk = load_vec(p + "bk");
    lw.wv = load_mat(p + "wv");
    lw.bv = load_vec(p + "bv");
    lw.wo = load_mat(p + "wo");
    lw.bo = load_vec(p + "bo");
    lw.ln1_gamma = load_vec(p + "ln1.gamma");
    lw.ln1_beta = load_vec(p + "ln1.beta");
    lw.ln2_gamma = load_vec(p + "ln2.gamma");
    lw.ln2_beta = load_vec(p + "ln2.beta");
    lw.ffn_w1 = load_mat(p + "ffn.w1");
    lw.ffn_b1 = load_vec(p + "ffn.b1");
    lw.ffn_w2 = load_mat(p + "ffn.w2");
    lw.ffn_b2 = load_vec(p + "ffn.b2");
  }
  w.out_w = load_mat("out.w");
  w.out_b = load_vec("out.b");
  w.validate(c);
  return model;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("corpus io: cannot open " + path + " for writing");
  os << kCorpusMagic << " " << kFormatVersion << "\n";
  os << "frame_ms " << corpus.frame_ms << "\n";
  os << "feat_dim " << corpus.feat_dim << "\n";
  os << "utts " << corpus.utts.size() << "\n";
  size_t offset = 0;
  for (const auto& u : corpus.utts) {
    os << "utt " << u.id << " " << u.reference.size();
    for (int t : u.reference) os << " " << t;
    os << " " << u.feats.rows << " " << u.feats.cols << " " << offset << "\n";
    offset += u.feats.data.size() * 4;
  }
  os << "end\n";
  for (const auto& u : corpus.utts) write_f32_le(os, u.feats.data.data(), u.feats.data.size());
  if (!os) throw std::runtime_error("corpus io: write failed for " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("corpus io: cannot open " + path);
  {
    std::istringstream ss(expect_line(is, "magic"));
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != kCorpusMagic) throw std::runtime_error("corpus io: bad magic in " + path);
    if (version != kFormatVersion) {
      throw std::runtime_error("corpus io: unsupported format version " +
                               std::to_string(version));
    }
  }
  Corpus corpus;
  corpus.frame_ms = static_cast<int>(parse_field(expect_line(is, "frame_ms"), "frame_ms"));
  corpus.feat_dim = static_cast<int>(parse_field(expect_line(is, "feat_dim"), "feat_dim"));
  const long n_utts = parse_field(expect_line(is, "utts"), "utts");
  struct Entry {
    size_t offset;
  };
  std::vector<size_t> offsets;
  for (long i = 0; i < n_utts; ++i) {
    std::istringstream ss(expect_line(is, "utt"));
    std::string tag;
    Utterance u;
    size_t n_tokens = 0;
    ss >> tag >> u.id >> n_tokens;
    if (tag != "utt") throw std::runtime_error("corpus io: bad utterance line");
    u.reference.resize(n_tokens);
    for (size_t j = 0; j < n_tokens; ++j) ss >> u.reference[j];
    int rows = 0, cols = 0;
    size_t offset = 0;
    ss >> rows >> cols >> offset;
    if (!ss) throw std::runtime_error("corpus io: bad utterance line for " + u.id);
    u.feats = Matrix(rows, cols);
    offsets.push_back(offset);
    corpus.utts.push_back(std::move(u));
  }
  if (expect_line(is, "end") != "end") throw std::runtime_error("corpus io: missing end marker");
  const std::streampos data_start = is.tellg();
  for (size_t i = 0; i < corpus.utts.size(); ++i) {
    is.seekg(data_start + static_cast<std::streamoff>(offsets[i]));
    read_f32_le(is, corpus.utts[i].feats.data.data(), corpus.utts[i].feats.data.size());
  }
  return corpus;
}

}  // namespace zeroprompt
