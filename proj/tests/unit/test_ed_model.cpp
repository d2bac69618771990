#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "seqmargin/beam_search.hpp"
#include "seqmargin/ed_model.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/importance.hpp"

using namespace seqmargin;
using namespace oracle;

namespace {

void zero_all(std::vector<NamedParameter> ps) {
  for (auto& p : ps) p.param->value.fill(0.0);
}

}  // namespace

TEST_CASE("zeroed context encoder gives a zero encoding") {
  EdModel m = tiny_ed(tiny_dims(7, 3, 4), 1);
  std::vector<NamedParameter> enc;
  m.context_encoder().collect(enc, "c");
  zero_all(enc);
  const Tensor v = m.encode_context(TokenSeq{Vocab::kBos, 3, 4, 5});
  for (double x : v.values()) CHECK(x == 0.0);
}

TEST_CASE("context truncation keeps the most recent tokens") {
  Rng rng(3);
  TokenSeq ctx = random_context(9, 149, rng);
  REQUIRE(ctx.size() == 150);
  const auto kept = truncate_context(ctx, 100);
  REQUIRE(kept.size() == 100);
  CHECK(std::equal(kept.begin(), kept.end(), ctx.end() - 100));
  ModelDims d = tiny_dims(9, 3, 4);
  d.unroll_limit = 100;
  EdModel m = tiny_ed(d, 2);
  const TokenSeq tail(ctx.end() - 100, ctx.end());
  CHECK(m.encode_context(ctx) == m.encode_context(tail));
  CHECK_THROWS_AS(check_label_length(random_label(9, 101, 101, rng), 100), Error);
}

TEST_CASE("single-token vocabulary has log probability zero") {
  ModelDims d = tiny_dims(1, 2, 3);
  d.bos = 0;
  d.eos = 0;
  EdModel m = tiny_ed(d, 5);
  const Tensor v = m.encode_context(TokenSeq{0});
  CHECK(std::abs(m.sequence_logprob(v, TokenSeq{0, 0})) <= 1e-15);
}

TEST_CASE("sequence_logprob matches stepwise scoring") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed, 2);
    const std::size_t vocab = 4 + rng.index(8);
    EdModel m = tiny_ed(tiny_dims(vocab, 2 + rng.index(3), 2 + rng.index(4), 1 + rng.index(2)), seed);
    const Tensor v = m.encode_context(random_context(vocab, 1 + rng.index(5), rng));
    const TokenSeq y = random_label(vocab, 0, 6, rng);
    const double lp = m.sequence_logprob(v, y);
    CHECK(std::abs(lp - stepwise_logprob(m, v, y)) <= 1e-12 * std::max(1.0, std::abs(lp)));
    double sum = 0.0;
    for (double t : m.token_logprobs(v, y)) sum += t;
    CHECK(std::abs(sum - lp) <= 1e-12 * std::max(1.0, std::abs(lp)));
  }
}

TEST_CASE("probability mass over bounded-length labels is at most one and grows with the bound") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EdModel m = tiny_ed(tiny_dims(5, 3, 4), seed, 1.0);
    Rng rng(seed);
    const Tensor v = m.encode_context(random_context(5, 3, rng));
    double prev = 0.0;
    for (std::size_t len = 0; len <= 6; ++len) {
      double mass = 0.0;
      for (const auto& y : all_labels(5, len)) mass += std::exp(m.sequence_logprob(v, y));
      CHECK(mass <= 1.0 + 1e-12);
      CHECK(mass >= prev - 1e-15);
      prev = mass;
    }
  }
}

TEST_CASE("initial loss is close to length times log vocab") {
  const std::size_t vocab = 30;
  EdModel m(tiny_dims(vocab, 8, 16));
  m.init(11);
  Rng rng(4);
  const Example ex{random_context(vocab, 5, rng), random_label(vocab, 4, 4, rng)};
  const double nll = -m.sequence_logprob(m.encode_context(ex.context), ex.label);
  const double expect = 5.0 * std::log(static_cast<double>(vocab));
  CHECK(std::abs(nll - expect) < 0.05 * expect);
}

TEST_CASE("training memorizes a single pair") {
  const std::size_t vocab = 12;
  EdModel m(tiny_dims(vocab, 8, 16));
  m.init(3);
  Rng rng(8);
  const std::vector<Example> batch{{random_context(vocab, 4, rng), random_label(vocab, 3, 3, rng)}};
  TrainOptions opts;
  opts.lr = 0.5;
  double loss = 0.0;
  for (int s = 0; s < 500; ++s) loss = train_step_ed(m, batch, opts).loss;
  CHECK(loss < 0.01);
}

TEST_CASE("ED gradient matches finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) worst = std::max(worst, ed_gradient_error(seed));
  CHECK(worst < 1e-4);
}

TEST_CASE("sampled softmax with the complement as a sure draw is exact") {
  // m = 2: the only negative is drawn with q = 1, so Z_hat = Z.
  const std::vector<double> logits{0.3, -1.2};
  const std::vector<NegativeSample> draws{{1, 1.0}, {1, 1.0}, {1, 1.0}};
  const auto r = sampled_token_softmax_loss(logits, 0, draws);
  CHECK(std::abs(r.loss - (naive_lse(logits) - logits[0])) <= 1e-14);
}

TEST_CASE("sampled softmax gradient matches finite differences") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> logits(6);
    for (auto& x : logits) x = rng.uniform(-2.0, 2.0);
    std::vector<NegativeSample> draws;
    for (int i = 0; i < 4; ++i) draws.push_back({1 + rng.index(5), rng.uniform(0.05, 0.5)});
    std::vector<double> g(6, 0.0);
    sampled_token_softmax_loss(logits, 0, draws, g);
    for (std::size_t j = 0; j < 6; ++j) {
      auto up = logits, dn = logits;
      up[j] += 1e-6;
      dn[j] -= 1e-6;
      const double num = (sampled_token_softmax_loss(up, 0, draws).loss -
                          sampled_token_softmax_loss(dn, 0, draws).loss) / 2e-6;
      CHECK(std::abs(num - g[j]) <= 1e-7);
    }
  }
}

TEST_CASE("sampled partition estimate is unbiased") {
  const std::size_t m = 50;
  Rng rng(9);
  std::vector<double> logits(m), unigram(m);
  double us = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    logits[i] = rng.uniform(-2.0, 2.0);
    unigram[i] = rng.uniform(0.1, 1.0);
    us += unigram[i];
  }
  for (auto& u : unigram) u /= us;
  const TokenProposal proposal(unigram);
  const std::size_t true_tok = 7, runs = 20000;
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  std::vector<double> zs;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto draws = proposal.sample(8, true_tok, rng);
    zs.push_back(std::exp(sampled_token_softmax_loss(logits, true_tok, draws).log_denominator));
  }
  const auto mc = summarize(zs, z);
  CHECK(std::abs(mc.mean - z) <= 3.0 * mc.std_error);

  // uniform subset: distinct tokens, q = 1/(m-1)
  const auto sub = proposal.sample(10, true_tok, rng, TokenSampling::kUniformSubset);
  std::vector<std::size_t> ids;
  for (const auto& s : sub) {
    CHECK(s.index != true_tok);
    CHECK(s.q == doctest::Approx(1.0 / (m - 1)));
    ids.push_back(s.index);
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("beam search") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed, 61);
    const std::size_t vocab = 4 + rng.index(6);
    EdModel m = tiny_ed(tiny_dims(vocab, 3, 4), seed, 1.0);
    const auto w = random_whitelist(vocab, 5 + rng.index(40), 4, rng);
    const auto trie = build_prefix_trie(strip_bos(w));
    const Tensor v = m.encode_context(random_context(vocab, 3, rng));

    const auto g = beam_search(m, v, trie, 1);
    REQUIRE_FALSE(g.ranked.empty());
    CHECK(g.ranked.front().sequence == greedy_trie_decode(m, v, trie, 20));

    // Pruning can lose the greedy path at a middle width, so only the
    // exhaustive width is guaranteed to dominate.
    const double full_top = beam_search(m, v, trie, w.size(), 0.0).ranked.front().score;
    for (std::size_t width : {1, 2, 3, 5, 8, 13, 50}) {
      const auto r = beam_search(m, v, trie, width, 0.0);
      REQUIRE_FALSE(r.ranked.empty());
      CHECK(r.ranked.size() <= width);
      for (std::size_t i = 0; i < r.ranked.size(); ++i) {
        const auto& h = r.ranked[i];
        CHECK(std::find(w.begin(), w.end(), h.sequence) != w.end());
        CHECK(std::abs(h.logprob - stepwise_logprob(m, v, h.sequence)) <= 1e-10);
        CHECK(h.score == h.logprob);
        if (i > 0) CHECK(r.ranked[i - 1].score >= h.score);
      }
      CHECK(full_top >= r.ranked.front().score - 1e-12);
    }

    const auto lr = beam_search(m, v, trie, 10, 1.0);
    for (const auto& h : lr.ranked) {
      CHECK(h.score == doctest::Approx(h.logprob / static_cast<double>(h.sequence.size() - 1)));
    }
  }
}

TEST_CASE("beam at full width finds the whitelist argmax") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(beam_optimality_case(seed).beam_matches);
}

TEST_CASE("length normalized score") {
  CHECK(length_normalized_score(-6.0, 3, 0.0) == -6.0);
  CHECK(length_normalized_score(-6.0, 3, 1.0) == -2.0);
  CHECK(length_normalized_score(-8.0, 4, 0.5) == doctest::Approx(-4.0));
}
