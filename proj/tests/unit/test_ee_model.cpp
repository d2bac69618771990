#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "seqmargin/ee_model.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/importance.hpp"

using namespace seqmargin;
using namespace oracle;

namespace {

void zero_all(std::vector<NamedParameter> ps) {
  for (auto& p : ps) p.param->value.fill(0.0);
}

std::vector<NamedParameter> collect(SequenceEncoder& e) {
  std::vector<NamedParameter> out;
  e.collect(out, "x");
  return out;
}

}  // namespace

TEST_CASE("label encoder basics") {
  EeModel m = tiny_ee(tiny_dims(8, 3, 4), 1);
  const TokenSeq y = label_of({3, 4});
  CHECK(m.encode_label(y) == m.encode_label(y));

  const Tensor vx = m.encode_context(TokenSeq{Vocab::kBos, 5, 6});
  const Tensor vy = m.encode_label(y);
  m.label_encoder().embedding().value.at(4, 0) += 0.25;
  CHECK_FALSE(m.encode_label(y) == vy);
  CHECK(m.encode_context(TokenSeq{Vocab::kBos, 5, 6}) == vx);

  zero_all(collect(m.label_encoder()));
  const Tensor zero = m.encode_label(y);
  for (double x : zero.values()) CHECK(x == 0.0);
}

TEST_CASE("zeroing the context encoder never changes label encodings") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EeModel m = tiny_ee(tiny_dims(9, 3, 5), seed);
    Rng rng(seed);
    std::vector<TokenSeq> ys;
    std::vector<Tensor> before;
    for (int i = 0; i < 5; ++i) {
      ys.push_back(random_label(9, 0, 5, rng));
      before.push_back(m.encode_label(ys.back()));
    }
    zero_all(collect(m.context_encoder()));
    for (int i = 0; i < 5; ++i) CHECK(m.encode_label(ys[i]) == before[i]);
  }
}

TEST_CASE("score") {
  const std::vector<double> e0{1, 0, 0}, e1{0, 1, 0};
  CHECK(score(e0, e0) == 1.0);
  CHECK(score(e0, e1) == 0.0);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = rng.uniform(-1, 1);
    for (auto& x : b) x = rng.uniform(-1, 1);
    CHECK(score(a, b) == score(b, a));
  }
}

TEST_CASE("importance sampled partition") {
  // both single draws averaged with their probabilities give Z exactly
  const double sp = 0.4, s1 = -0.3, s2 = 1.1;
  const double z = std::exp(sp) + std::exp(s1) + std::exp(s2);
  const ScoredSample d1[] = {{s1, 0.5}}, d2[] = {{s2, 0.5}};
  const double avg = 0.5 * std::exp(estimate_log_partition(sp, d1)) + 0.5 * std::exp(estimate_log_partition(sp, d2));
  CHECK(std::abs(avg - z) <= 1e-14 * z);

  const ScoredSample both[] = {{0.0, 0.5}, {0.0, 0.5}};
  CHECK(std::abs(estimate_log_partition(0.0, both) - std::log(3.0)) <= 1e-15);

  std::vector<double> w;
  partition_weights(0.0, both, std::log(3.0), w);
  REQUIRE(w.size() == 3);
  CHECK(std::abs(w[0] + w[1] + w[2] - 1.0) <= 1e-15);
  CHECK(w[0] == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(estimate_log_partition(0.0, std::span<const ScoredSample>{}), Error);
}

TEST_CASE("estimator is unbiased by exhaustive expectation") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.index(5), k = 1 + rng.index(3);
    std::vector<double> scores(n), q(n);
    double qs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-2.0, 2.0);
      q[i] = rng.uniform(0.1, 1.0);
      qs += q[i];
    }
    for (auto& x : q) x /= qs;
    CHECK(exhaustive_estimator_gap(rng.uniform(-1.0, 1.0), scores, q, k) <= 1e-12);
  }
}

TEST_CASE("estimator Monte Carlo over a 50-member pool") {
  const auto mc = pool_estimator_monte_carlo(50, 16, 10000);
  CHECK(mc.z_score() <= 3.0);
}

TEST_CASE("EE gradient matches finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) worst = std::max(worst, ee_gradient_error(seed));
  CHECK(worst < 1e-4);
}

TEST_CASE("EE training separates truth from a single negative") {
  const std::size_t vocab = 10;
  EeModel m(tiny_dims(vocab, 8, 16));
  m.init(4);
  const TokenSeq truth = label_of({3, 4}), other = label_of({5});
  NegativePool pool({truth, other}, {0.5, 0.5});
  const std::vector<Example> batch{{TokenSeq{Vocab::kBos, 6, 7}, truth}};
  TrainOptions opts;
  opts.lr = 0.5;
  opts.negatives = 4;
  Rng rng(1);
  const double first = train_step_ee(m, batch, pool, opts, rng).loss;
  double last = first;
  for (int s = 0; s < 300; ++s) {
    last = train_step_ee(m, batch, pool, opts, rng).loss;
    CHECK(last > 0.0);
  }
  CHECK(last < 0.05);
  CHECK(last < first);
}

TEST_CASE("whitelist index") {
  EeModel m = tiny_ee(tiny_dims(9, 3, 4), 6);
  const std::vector<TokenSeq> w{label_of({3}), label_of({4, 5}), label_of({6, 7, 8})};
  const WhitelistIndex idx = precompute_whitelist_index(m, w);
  REQUIRE(idx.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor v = m.encode_label(w[i]);
    for (std::size_t j = 0; j < idx.width(); ++j) CHECK(idx.vectors().at(i, j) == v.values()[j]);
  }
  const WhitelistIndex again = precompute_whitelist_index(m, w);
  CHECK(again.vectors() == idx.vectors());
  CHECK(again.model_fingerprint() == idx.model_fingerprint());

  m.context_encoder().embedding().value.at(3, 1) += 1e-9;
  CHECK(m.fingerprint() != idx.model_fingerprint());

  const auto path = (std::filesystem::temp_directory_path() / "sm_index_test.bin").string();
  idx.save(path);
  const WhitelistIndex back = WhitelistIndex::load(path);
  std::remove(path.c_str());
  CHECK(back.vectors() == idx.vectors());
  CHECK(std::equal(back.sequences().begin(), back.sequences().end(), idx.sequences().begin()));
  CHECK(back.model_fingerprint() == idx.model_fingerprint());
}

TEST_CASE("retrieve_topk") {
  const std::size_t n = 4;
  std::vector<TokenSeq> seqs;
  Tensor basis = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    seqs.push_back(label_of({static_cast<TokenId>(3 + i)}));
    basis.at(i, i) = 1.0;
  }
  const WhitelistIndex idx(seqs, basis, 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> v(n, 0.0);
    v[j] = 1.0;
    const auto top = retrieve_topk(idx, v, 1);
    REQUIRE(top.size() == 1);
    CHECK(top[0].sequence == seqs[j]);
    CHECK(top[0].score == 1.0);
  }
  const auto all = retrieve_topk(idx, std::vector<double>{0.1, 0.4, 0.3, 0.2}, 10);
  REQUIRE(all.size() == n);
  std::vector<TokenSeq> got;
  for (const auto& s : all) got.push_back(s.sequence);
  CHECK(std::is_permutation(got.begin(), got.end(), seqs.begin()));
  CHECK(got[0] == seqs[1]);

  for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(retrieval_optimality_case(seed));
}

TEST_CASE("adding a constant to every score leaves the ranking unchanged") {
  // An extra coordinate of 1 in v_x and c in every row shifts all scores by c.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.index(30), d = 2 + rng.index(5);
    std::vector<TokenSeq> seqs;
    Tensor rows = Tensor::matrix(n, d), shifted = Tensor::matrix(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
      seqs.push_back(label_of({static_cast<TokenId>(3 + i)}));
      for (std::size_t j = 0; j < d; ++j) shifted.at(i, j) = rows.at(i, j) = rng.uniform(-1, 1);
      shifted.at(i, d) = 2.5;
    }
    std::vector<double> v(d);
    for (auto& x : v) x = rng.uniform(-1, 1);
    auto v1 = v;
    v1.push_back(1.0);
    const auto a = retrieve_topk(WhitelistIndex(seqs, rows, 0), v, n);
    const auto b = retrieve_topk(WhitelistIndex(seqs, shifted, 0), v1, n);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].sequence == b[i].sequence);
  }
}
