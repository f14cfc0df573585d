#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "zeroprompt/io.h"
#include "zeroprompt/rng.h"
#include "zeroprompt/trainer.h"

using namespace zeroprompt;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/zeroprompt_test_") + name;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("model file round-trips bitwise") {
  Model model;
  model.cfg.num_layers = 2;
  model.cfg.d_model = 8;
  model.cfg.n_heads = 2;
  model.cfg.ffn_dim = 12;
  model.cfg.vocab_size = 4;
  model.cfg.feat_dim = 5;
  model.cfg.chunk_frames = 4;
  model.cfg.left_chunks = 3;
  model.weights = init_weights(model.cfg, 99);

  const std::string path = temp_path("model.zpm");
  save_model(model, path);
  const Model loaded = load_model(path);
  CHECK(loaded.cfg.num_layers == model.cfg.num_layers);
  CHECK(loaded.cfg.left_chunks == model.cfg.left_chunks);
  CHECK(loaded.weights.in_w.data == model.weights.in_w.data);
  CHECK(loaded.weights.layers[1].ffn_w2.data == model.weights.layers[1].ffn_w2.data);
  CHECK(loaded.weights.out_b == model.weights.out_b);

  // Re-saving the loaded model reproduces the file byte for byte.
  const std::string path2 = temp_path("model2.zpm");
  save_model(loaded, path2);
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("model loader rejects foreign files") {
  const std::string path = temp_path("bogus.zpm");
  std::ofstream(path) << "not-a-model 1\n";
  CHECK_THROWS_AS(load_model(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_model(temp_path("does_not_exist.zpm")), std::runtime_error);
}

TEST_CASE("corpus file round-trips") {
  const SyntheticGrammar g = default_grammar(6, 4, 123);
  const Corpus corpus = gen_corpus(g, 5, 2, 4);
  const std::string path = temp_path("corpus.zpc");
  save_corpus(corpus, path);
  const Corpus loaded = load_corpus(path);
  REQUIRE(loaded.utts.size() == corpus.utts.size());
  CHECK(loaded.frame_ms == corpus.frame_ms);
  CHECK(loaded.feat_dim == corpus.feat_dim);
  for (size_t i = 0; i < corpus.utts.size(); ++i) {
    CHECK(loaded.utts[i].id == corpus.utts[i].id);
    CHECK(loaded.utts[i].reference == corpus.utts[i].reference);
    CHECK(loaded.utts[i].feats.data == corpus.utts[i].feats.data);
  }
  std::remove(path.c_str());
}
