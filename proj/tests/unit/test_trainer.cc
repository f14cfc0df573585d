#include <cmath>
#include <map>
#include <vector>

#include "autograd.h"
#include "doctest.h"
#include "zeroprompt/ctc.h"
#include "zeroprompt/linalg.h"
#include "zeroprompt/rng.h"
#include "zeroprompt/trainer.h"

using namespace zeroprompt;

namespace {

EncoderConfig micro_config() {
  EncoderConfig cfg;
  cfg.num_layers = 1;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.ffn_dim = 12;
  cfg.vocab_size = 4;
  cfg.feat_dim = 4;
  cfg.chunk_frames = 4;
  cfg.left_chunks = -1;
  return cfg;
}

SyntheticGrammar micro_grammar(uint64_t seed) {
  SyntheticGrammar g = default_grammar(4, 4, seed);
  g.frames_per_token = 3;
  g.lead_silence_frames = 2;
  g.trail_silence_frames = 2;
  g.noise_std = 0.05f;
  g.seed = seed;
  return g;
}

}  // namespace

TEST_CASE("noise-free corpora reconstruct exactly from embeddings") {
  SyntheticGrammar g = micro_grammar(11);
  g.noise_std = 0.0f;
  const Corpus c = gen_corpus(g, 1, 3, 3);
  const Utterance& u = c.utts[0];
  REQUIRE(u.reference.size() == 3);
  CHECK(u.feats.rows == g.lead_silence_frames + 9 + g.trail_silence_frames);
  for (int r = 0; r < g.lead_silence_frames; ++r) {
    for (int col = 0; col < u.feats.cols; ++col) CHECK(u.feats.at(r, col) == 0.0f);
  }
  for (size_t t = 0; t < u.reference.size(); ++t) {
    for (int f = 0; f < g.frames_per_token; ++f) {
      const int row = g.lead_silence_frames + static_cast<int>(t) * g.frames_per_token + f;
      for (int col = 0; col < u.feats.cols; ++col) {
        CHECK(u.feats.at(row, col) == g.embeddings.at(u.reference[t] - 1, col));
      }
    }
  }
}

TEST_CASE("corpus generation is bit-deterministic under its seed") {
  const SyntheticGrammar g = micro_grammar(13);
  const Corpus a = gen_corpus(g, 8, 2, 5);
  const Corpus b = gen_corpus(g, 8, 2, 5);
  REQUIRE(a.utts.size() == b.utts.size());
  for (size_t i = 0; i < a.utts.size(); ++i) {
    CHECK(a.utts[i].reference == b.utts[i].reference);
    CHECK(a.utts[i].feats.data == b.utts[i].feats.data);
  }
}

TEST_CASE("empirical bigram frequencies follow the transition table") {
  const SyntheticGrammar g = micro_grammar(17);
  const Corpus c = gen_corpus(g, 10000, 4, 8);
  const int n_real = g.vocab_size - 1;
  std::vector<std::vector<long>> counts(n_real, std::vector<long>(n_real, 0));
  std::vector<long> totals(n_real, 0);
  for (const auto& u : c.utts) {
    for (size_t i = 1; i < u.reference.size(); ++i) {
      const int from = u.reference[i - 1] - 1;
      const int to = u.reference[i] - 1;
      ++counts[from][to];
      ++totals[from];
    }
  }
  for (int i = 0; i < n_real; ++i) {
    REQUIRE(totals[i] > 0);
    for (int j = 0; j < n_real; ++j) {
      const double freq = static_cast<double>(counts[i][j]) / totals[i];
      CHECK(std::abs(freq - g.transition.at(i, j)) < 0.02);
    }
  }
}

TEST_CASE("traced forward is bit-identical to the offline forward") {
  const EncoderConfig cfg = micro_config();
  const EncoderWeights w = init_weights(cfg, 19);
  const Corpus c = gen_corpus(micro_grammar(19), 1, 3, 3);
  detail::EncoderTape tape;
  const Matrix traced = detail::forward_traced(cfg, w, c.utts[0].feats, &tape);
  const Matrix offline = forward_offline(cfg, w, c.utts[0].feats);
  CHECK(traced.data == offline.data);
  CHECK(tape.logprobs.data == offline.data);
}

TEST_CASE("encoder backward passes spot finite-difference checks") {
  const EncoderConfig cfg = micro_config();
  EncoderWeights w = init_weights(cfg, 23);
  const Corpus c = gen_corpus(micro_grammar(23), 1, 2, 2);
  const Matrix& feats = c.utts[0].feats;
  const TokenSeq& target = c.utts[0].reference;

  auto loss_of = [&](const EncoderWeights& weights) {
    return ctc_loss(forward_offline(cfg, weights, feats), target);
  };

  detail::EncoderTape tape;
  detail::forward_traced(cfg, w, feats, &tape);
  const CtcGrad cg = ctc_grad(tape.logprobs, target);
  REQUIRE(cg.feasible);
  EncoderWeights grads = detail::encoder_backward(cfg, w, tape, cg.grad);

  detail::ParamViews wv = detail::param_views(w);
  detail::ParamViews gv = detail::param_views(grads);
  Rng rng(29);
  const float h = 1e-2f;
  int checked = 0;
  // A few entries from every tensor class; float32 forward noise keeps this
  // a sign-and-scale check rather than a tight bound.
  for (size_t m = 0; m < wv.mats.size(); ++m) {
    const size_t idx = rng.below(wv.mats[m]->data.size());
    float& slot = wv.mats[m]->data[idx];
    const float saved = slot;
    slot = saved + h;
    const double up = loss_of(w);
    slot = saved - h;
    const double down = loss_of(w);
    slot = saved;
    const double fd = (up - down) / (2.0 * h);
    const double analytic = gv.mats[m]->data[idx];
    if (std::abs(fd) > 5e-3 || std::abs(analytic) > 5e-3) {
      CHECK(std::abs(analytic - fd) / std::max(std::abs(fd), 1e-3) < 0.15);
      ++checked;
    }
  }
  CHECK(checked >= 3);
}

TEST_CASE("zero learning rate leaves the model untouched") {
  const EncoderConfig cfg = micro_config();
  const Corpus c = gen_corpus(micro_grammar(31), 4, 2, 4);
  TrainConfig tc;
  tc.epochs = 3;
  tc.learning_rate = 0.0f;
  tc.seed = 31;
  const TrainResult r = train(cfg, c, tc);
  const EncoderWeights fresh = init_weights(cfg, tc.seed);
  CHECK(r.weights.in_w.data == fresh.in_w.data);
  CHECK(r.weights.layers[0].wq.data == fresh.layers[0].wq.data);
  REQUIRE(r.loss_curve.size() == 3);
  CHECK(r.loss_curve[0] == doctest::Approx(r.loss_curve[2]));
}

TEST_CASE("a single utterance can be memorized") {
  const EncoderConfig cfg = micro_config();
  SyntheticGrammar g = micro_grammar(37);
  g.noise_std = 0.0f;
  const Corpus c = gen_corpus(g, 1, 3, 3);
  TrainConfig tc;
  tc.epochs = 150;
  tc.learning_rate = 0.3f;
  tc.seed = 37;
  const TrainResult r = train(cfg, c, tc);
  CHECK(r.loss_curve.back() < r.loss_curve.front());
  const Model model{cfg, r.weights};
  CHECK(greedy_wer(model, c) == 0.0);
}

TEST_CASE("training aborts on divergence naming the step") {
  const EncoderConfig cfg = micro_config();
  const Corpus c = gen_corpus(micro_grammar(41), 2, 2, 3);
  TrainConfig tc;
  tc.epochs = 50;
  tc.learning_rate = 5e6f;  // guaranteed blow-up
  tc.seed = 41;
  CHECK_THROWS_WITH_AS(train(cfg, c, tc), doctest::Contains("step"), std::runtime_error);
}

TEST_CASE("training rejects infeasible targets up front") {
  const EncoderConfig cfg = micro_config();
  SyntheticGrammar g = micro_grammar(43);
  Corpus c = gen_corpus(g, 1, 2, 2);
  c.utts[0].feats = Matrix(1, cfg.feat_dim);  // one frame, two tokens
  CHECK_THROWS_AS(train(cfg, c, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("evaluate produces one row per stream config") {
  const EncoderConfig cfg = micro_config();
  const Corpus c = gen_corpus(micro_grammar(47), 3, 2, 3);
  const Model model{cfg, init_weights(cfg, 47)};
  StreamConfig causal;
  causal.chunk_ms = 40;
  StreamConfig zp = causal;
  zp.mode = StreamMode::kZeroPrompt;
  zp.zp_ms = 40;
  const auto rows = evaluate(model, c, {causal, zp});
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].zp_enabled);
  CHECK(rows[1].zp_enabled);
  // Final-hypothesis invariance: identical error counts in both rows.
  CHECK(rows[0].report.wer_counts.total() == rows[1].report.wer_counts.total());
  CHECK(rows[0].report.total_chunks == rows[1].report.total_chunks);
}
