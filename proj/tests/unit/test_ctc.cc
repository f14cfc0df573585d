#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "zeroprompt/ctc.h"
#include "zeroprompt/linalg.h"
#include "zeroprompt/rng.h"

using namespace zeroprompt;

namespace {

Matrix random_logprobs(Rng* rng, int frames, int vocab) {
  Matrix logits(frames, vocab);
  for (float& v : logits.data) v = static_cast<float>(rng->uniform(-2.0, 2.0));
  return log_softmax(logits);
}

// Brute force: enumerate every frame labeling, collapse it, and sum the
// probabilities of those matching the target. Independent of the forward
// recursion.
double ctc_loss_bruteforce(const Matrix& logprobs, const TokenSeq& target) {
  const int frames = logprobs.rows;
  const int vocab = logprobs.cols;
  long total = 1;
  for (int t = 0; t < frames; ++t) total *= vocab;
  double p = 0.0;
  for (long code = 0; code < total; ++code) {
    long rem = code;
    std::vector<int> labels(frames);
    double logp = 0.0;
    for (int t = 0; t < frames; ++t) {
      labels[t] = static_cast<int>(rem % vocab);
      rem /= vocab;
      logp += static_cast<double>(logprobs.at(t, labels[t]));
    }
    if (greedy_collapse(labels) == target) p += std::exp(logp);
  }
  return p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
}

}  // namespace

TEST_CASE("greedy collapse drops repeats then blanks") {
  // [a, a, blank, a, b] -> [a, a, b]
  CHECK(greedy_collapse({1, 1, 0, 1, 2}) == TokenSeq{1, 1, 2});
}

TEST_CASE("greedy collapse of all blanks is empty") {
  CHECK(greedy_collapse({0, 0, 0, 0}).empty());
}

TEST_CASE("split collapse with threaded state equals the unsplit call") {
  CollapseState state;
  TokenSeq out;
  greedy_collapse({1, 1, 0}, &state, &out);
  greedy_collapse({1, 2}, &state, &out);
  CHECK(out == greedy_collapse({1, 1, 0, 1, 2}));
}

TEST_CASE("chunked collapse equals whole-sequence collapse for random splits") {
  Rng rng(23);
  for (int iter = 0; iter < 300; ++iter) {
    const int len = 1 + static_cast<int>(rng.below(20));
    std::vector<int> ids(len);
    for (int& id : ids) id = static_cast<int>(rng.below(4));
    const TokenSeq whole = greedy_collapse(ids);

    CollapseState state;
    TokenSeq chunked;
    size_t pos = 0;
    while (pos < ids.size()) {
      const size_t piece = 1 + rng.below(ids.size() - pos);
      greedy_collapse(std::vector<int>(ids.begin() + pos, ids.begin() + pos + piece), &state,
                      &chunked);
      pos += piece;
    }
    CHECK(chunked == whole);
  }
}

TEST_CASE("ctc loss of a single-frame target is -log p") {
  Matrix logprobs = log_softmax([] {
    Matrix m(1, 2);
    m.at(0, 0) = 0.3f;
    m.at(0, 1) = 1.9f;
    return m;
  }());
  CHECK(ctc_loss(logprobs, {1}) ==
        doctest::Approx(-static_cast<double>(logprobs.at(0, 1))).epsilon(1e-9));
}

TEST_CASE("ctc loss of the empty target is the blank path") {
  Rng rng(5);
  const Matrix lp = random_logprobs(&rng, 2, 3);
  const double expected = -(static_cast<double>(lp.at(0, 0)) + static_cast<double>(lp.at(1, 0)));
  CHECK(ctc_loss(lp, {}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ctc loss equals brute-force alignment enumeration") {
  Rng rng(29);
  const Matrix lp = random_logprobs(&rng, 3, 3);
  const double expected = ctc_loss_bruteforce(lp, {1, 2});
  CHECK(std::abs(ctc_loss(lp, {1, 2}) - expected) < 1e-10);
}

TEST_CASE("ctc loss brute-force sweep over small shapes") {
  Rng rng(31);
  for (int iter = 0; iter < 60; ++iter) {
    const int frames = 1 + static_cast<int>(rng.below(4));
    const int vocab = 2 + static_cast<int>(rng.below(2));
    const int target_len = static_cast<int>(rng.below(3));
    TokenSeq target;
    for (int i = 0; i < target_len; ++i) {
      target.push_back(1 + static_cast<int>(rng.below(vocab - 1)));
    }
    const Matrix lp = random_logprobs(&rng, frames, vocab);
    const double expected = ctc_loss_bruteforce(lp, target);
    const double got = ctc_loss(lp, target);
    if (std::isinf(expected)) {
      CHECK(std::isinf(got));
    } else {
      CHECK(std::abs(got - expected) < 1e-10);
    }
  }
}

TEST_CASE("infeasible target reports +inf loss and zero gradient") {
  Rng rng(7);
  const Matrix lp = random_logprobs(&rng, 2, 3);
  const TokenSeq target = {1, 1, 2};  // needs at least 4 frames
  CHECK(std::isinf(ctc_loss(lp, target)));
  const CtcGrad g = ctc_grad(lp, target);
  CHECK_FALSE(g.feasible);
  for (float v : g.grad.data) CHECK(v == 0.0f);
}

TEST_CASE("single-frame gradient reduces to cross-entropy") {
  Rng rng(13);
  const Matrix lp = random_logprobs(&rng, 1, 3);
  const CtcGrad g = ctc_grad(lp, {1});
  for (int v = 0; v < 3; ++v) {
    const double expected = std::exp(static_cast<double>(lp.at(0, v))) - (v == 1 ? 1.0 : 0.0);
    CHECK(g.grad.at(0, v) == doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("gradient rows sum to zero") {
  Rng rng(37);
  const Matrix lp = random_logprobs(&rng, 4, 3);
  const CtcGrad g = ctc_grad(lp, {1, 2});
  for (int t = 0; t < 4; ++t) {
    double sum = 0.0;
    for (int v = 0; v < 3; ++v) sum += static_cast<double>(g.grad.at(t, v));
    CHECK(std::abs(sum) < 1e-6);
  }
}

TEST_CASE("gradient passes central finite differences") {
  Rng rng(41);
  const int frames = 4, vocab = 3;
  std::vector<double> logits(frames * vocab);
  for (double& v : logits) v = rng.uniform(-2.0, 2.0);
  const TokenSeq target = {1, 2};

  auto loss_of = [&](const std::vector<double>& z) {
    // log-softmax in double, then the double-precision loss core.
    std::vector<double> lp(z.size());
    for (int t = 0; t < frames; ++t) {
      double mx = -1e300;
      for (int v = 0; v < vocab; ++v) mx = std::max(mx, z[t * vocab + v]);
      double sum = 0.0;
      for (int v = 0; v < vocab; ++v) sum += std::exp(z[t * vocab + v] - mx);
      const double lse = mx + std::log(sum);
      for (int v = 0; v < vocab; ++v) lp[t * vocab + v] = z[t * vocab + v] - lse;
    }
    return detail::ctc_loss_grad_f64(lp, frames, vocab, target, nullptr, nullptr);
  };

  std::vector<double> lp(logits.size());
  {
    std::vector<double> z = logits;
    for (int t = 0; t < frames; ++t) {
      double mx = -1e300;
      for (int v = 0; v < vocab; ++v) mx = std::max(mx, z[t * vocab + v]);
      double sum = 0.0;
      for (int v = 0; v < vocab; ++v) sum += std::exp(z[t * vocab + v] - mx);
      const double lse = mx + std::log(sum);
      for (int v = 0; v < vocab; ++v) lp[t * vocab + v] = z[t * vocab + v] - lse;
    }
  }
  std::vector<double> analytic;
  bool feasible = true;
  detail::ctc_loss_grad_f64(lp, frames, vocab, target, &analytic, &feasible);
  REQUIRE(feasible);

  const double h = 1e-3;
  for (size_t i = 0; i < logits.size(); ++i) {
    std::vector<double> plus = logits, minus = logits;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
    const double denom = std::max(1e-6, std::abs(fd));
    CHECK(std::abs(analytic[i] - fd) / denom < 1e-4);
  }

  // The float32 surface agrees with the double core at its own precision.
  Matrix lp32(frames, vocab);
  for (size_t i = 0; i < lp.size(); ++i) lp32.data[i] = static_cast<float>(lp[i]);
  const CtcGrad g32 = ctc_grad(lp32, target);
  for (size_t i = 0; i < analytic.size(); ++i) {
    CHECK(std::abs(g32.grad.data[i] - analytic[i]) < 1e-4);
  }
}

TEST_CASE("edit distance of identical sequences is zero") {
  const EditCounts c = edit_distance({1, 2, 3}, {1, 2, 3});
  CHECK(c.substitutions == 0);
  CHECK(c.deletions == 0);
  CHECK(c.insertions == 0);
}

TEST_CASE("empty hypothesis counts all deletions") {
  const EditCounts c = edit_distance({}, {1, 2, 3, 4, 5});
  CHECK(c.substitutions == 0);
  CHECK(c.deletions == 5);
  CHECK(c.insertions == 0);
}

TEST_CASE("edit distance small case") {
  // hyp [a,b,c] vs ref [a,x,c,d]: substitute b->x, delete d.
  const EditCounts c = edit_distance({1, 2, 3}, {1, 9, 3, 4});
  CHECK(c.total() == 2);
  CHECK(c.substitutions == 1);
  CHECK(c.deletions == 1);
}

TEST_CASE("edit distance matches an exhaustive DP oracle") {
  // Plain min-cost DP without count tracking, as an independent check of
  // the total.
  auto dist_oracle = [](const TokenSeq& a, const TokenSeq& b) {
    std::vector<std::vector<long>> d(a.size() + 1, std::vector<long>(b.size() + 1, 0));
    for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<long>(i);
    for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<long>(j);
    for (size_t i = 1; i <= a.size(); ++i) {
      for (size_t j = 1; j <= b.size(); ++j) {
        d[i][j] = std::min({d[i - 1][j - 1] + (a[i - 1] != b[j - 1] ? 1 : 0),
                            d[i - 1][j] + 1, d[i][j - 1] + 1});
      }
    }
    return d[a.size()][b.size()];
  };
  Rng rng(43);
  for (int iter = 0; iter < 200; ++iter) {
    TokenSeq a(rng.below(8)), b(rng.below(8));
    for (int& t : a) t = 1 + static_cast<int>(rng.below(3));
    for (int& t : b) t = 1 + static_cast<int>(rng.below(3));
    CHECK(edit_distance(a, b).total() == dist_oracle(a, b));
  }
}

TEST_CASE("edit distance is symmetric with deletions and insertions swapped") {
  Rng rng(47);
  for (int iter = 0; iter < 200; ++iter) {
    TokenSeq a(rng.below(10)), b(rng.below(10));
    for (int& t : a) t = 1 + static_cast<int>(rng.below(4));
    for (int& t : b) t = 1 + static_cast<int>(rng.below(4));
    const EditCounts ab = edit_distance(a, b);
    const EditCounts ba = edit_distance(b, a);
    CHECK(ab.substitutions == ba.substitutions);
    CHECK(ab.deletions == ba.insertions);
    CHECK(ab.insertions == ba.deletions);
  }
}
