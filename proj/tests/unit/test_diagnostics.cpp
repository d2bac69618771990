#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "seqmargin/diagnostics.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/report.hpp"

using namespace seqmargin;
using namespace oracle;

namespace {

struct Fixture {
  std::size_t vocab;
  EdModel model;
  std::vector<TokenSeq> whitelist;
  PrefixTrie trie;
  std::vector<Example> test;
};

Fixture make_fixture(std::uint64_t seed, std::size_t n_test = 60) {
  Rng rng(seed, 71);
  const std::size_t vocab = 6;
  Fixture f{vocab, tiny_ed(tiny_dims(vocab, 3, 4), seed, 1.0), {}, {}, {}};
  f.whitelist = random_whitelist(vocab, 30, 5, rng);
  f.trie = build_prefix_trie(strip_bos(f.whitelist));
  for (std::size_t i = 0; i < n_test; ++i) {
    f.test.push_back({random_context(vocab, 3, rng), f.whitelist[rng.index(f.whitelist.size())]});
  }
  return f;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sm_diag_" + name);
}

}  // namespace

TEST_CASE("length buckets") {
  CHECK(length_bucket(0) == 0);
  CHECK(length_bucket(1) == 0);
  CHECK(length_bucket(9) == 8);
  CHECK(length_bucket(10) == 9);
  CHECK(length_bucket(250) == 9);
  CHECK(bucket_label(0) == "1");
  CHECK(bucket_label(9) == "10+");
}

TEST_CASE("margin_pair") {
  EdModel m = tiny_ed(tiny_dims(8, 3, 4), 3, 1.0);
  const TokenSeq ctx{Vocab::kBos, 5, 6};
  const Tensor v = m.encode_context(ctx);

  SUBCASE("global margin is the difference of two sequence log probabilities") {
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
      const TokenSeq a = random_label(8, 1, 5, rng), b = random_label(8, 1, 5, rng);
      if (a == b) continue;
      const auto r = margin_pair(m, v, a, b);
      const double diff = stepwise_logprob(m, v, a) - stepwise_logprob(m, v, b);
      CHECK(std::abs(r.global_margin - diff) <= 1e-12);
      CHECK((r.global_margin < 0) == (m.sequence_logprob(v, a) < m.sequence_logprob(v, b)));
      CHECK(r.correct_len == label_word_count(a));
      CHECK(r.predicted_len == label_word_count(b));
      CHECK(r.first_divergence_pos <= std::min(r.correct_len, r.predicted_len));
      CHECK(a[1 + r.first_divergence_pos] != b[1 + r.first_divergence_pos]);
    }
    CHECK_THROWS_AS(margin_pair(m, v, label_of({3}), label_of({3})), Error);
  }

  SUBCASE("local margin uses the true prefix at the first divergence") {
    const TokenSeq yp = label_of({3, 4, 5}), ym = label_of({3, 6});
    const auto r = margin_pair(m, ctx, yp, ym);
    CHECK(r.first_divergence_pos == 1);
    auto state = m.advance(m.advance(m.initial_state(v), Vocab::kBos), 3);
    std::vector<double> lp;
    m.next_logprobs(state, lp);
    CHECK(std::abs(r.local_margin - (std::exp(lp[4]) - std::exp(lp[6]))) <= 1e-14);
    CHECK(std::abs(r.local_margin_log - (lp[4] - lp[6])) <= 1e-12);
  }

  SUBCASE("single divergence with shared embeddings gives equal local and global margins") {
    // Tokens 4 and 6 get the same embedding so the state after them agrees.
    for (std::size_t j = 0; j < 3; ++j) {
      m.decoder().embedding().value.at(6, j) = m.decoder().embedding().value.at(4, j);
    }
    const Tensor v2 = m.encode_context(ctx);
    const auto r = margin_pair(m, v2, label_of({3, 4}), label_of({3, 6}));
    CHECK(std::abs(r.local_margin_log - r.global_margin) <= 1e-12);
  }

  SUBCASE("uniform model") {
    for (auto& p : m.named_parameters()) p.param->value.fill(0.0);
    const Tensor v0 = m.encode_context(ctx);
    const auto r = margin_pair(m, v0, label_of({3, 4, 5}), label_of({6}));
    CHECK(std::abs(r.local_margin) <= 1e-15);
    CHECK(std::abs(r.global_margin - (-2.0 * std::log(8.0))) <= 1e-12);
  }
}

TEST_CASE("recall") {
  const std::vector<TokenSeq> truth{label_of({3}), label_of({3, 4}), label_of({5, 5, 5})};
  std::vector<std::vector<TokenSeq>> first, never;
  for (const auto& t : truth) {
    first.push_back({t, label_of({9})});
    never.push_back({label_of({9}), label_of({8})});
  }
  const auto all = recall_at_k(first, truth, {1, 2});
  const auto none = recall_at_k(never, truth, {1, 2});
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(all.overall(k) == 1.0);
    CHECK(none.overall(k) == 0.0);
    for (std::size_t b = 0; b < 3; ++b) {
      CHECK(all.cell(k, b).recall() == 1.0);
      CHECK(all.cell(k, b).denominator == 1);
    }
  }
  CHECK(all.total() == 3);
  CHECK(rank_of(first[1], truth[1]) == 1);
  CHECK(rank_of(never[1], truth[1]) == 0);

  // random permutations of 10 with K = 5
  Rng rng(12);
  std::vector<TokenSeq> w;
  for (TokenId t = 3; t < 13; ++t) w.push_back(label_of({t}));
  std::vector<std::vector<TokenSeq>> ranked;
  std::vector<TokenSeq> truths;
  const std::size_t trials = 10000;
  for (std::size_t i = 0; i < trials; ++i) {
    auto perm = w;
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    ranked.push_back(perm);
    truths.push_back(w[rng.index(w.size())]);
  }
  const auto rt = recall_at_k(ranked, truths, {1, 5, 10});
  CHECK(std::abs(rt.overall(1) - 0.5) <= 3.0 * std::sqrt(0.25 / trials));
  CHECK(rt.overall(2) == 1.0);

  // nondecreasing in K everywhere, and merging is additive
  RecallTable a({1, 3, 7}), b({1, 3, 7});
  for (int i = 0; i < 500; ++i) {
    (i % 2 ? a : b).add(rng.index(14), rng.index(10));
  }
  RecallTable merged = a;
  merged.merge(b);
  CHECK(merged.total() == 500);
  for (std::size_t bucket = 0; bucket < kLengthBuckets; ++bucket) {
    CHECK(merged.cell(0, bucket).recall() <= merged.cell(1, bucket).recall());
    CHECK(merged.cell(1, bucket).recall() <= merged.cell(2, bucket).recall());
    CHECK(merged.cell(0, bucket).denominator == a.cell(0, bucket).denominator + b.cell(0, bucket).denominator);
  }
}

TEST_CASE("beam width sweep") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Fixture f = make_fixture(seed);
    const auto sweep = beam_width_sweep(f.model, f.test, f.trie, {1, 5, 10, 15}, 0.0, 2);
    REQUIRE(sweep.widths.size() == 4);
    for (std::size_t wi = 0; wi < 4; ++wi) CHECK(sweep.total(wi) == f.test.size());
    CHECK(sweep.rows().size() == 4 * kLengthBuckets);

    std::uint64_t greedy_correct = 0;
    for (const auto& ex : f.test) {
      greedy_correct += greedy_trie_decode(f.model, f.model.encode_context(ex.context), f.trie, 20) == ex.label;
    }
    const auto only1 = beam_width_sweep(f.model, f.test, f.trie, {1});
    std::uint64_t c1 = 0;
    for (std::size_t b = 0; b < kLengthBuckets; ++b) c1 += only1.correct(0, b);
    CHECK(c1 == greedy_correct);
    for (std::size_t b = 0; b < kLengthBuckets; ++b) CHECK(only1.correct(0, b) == sweep.correct(0, b));
  }
}

TEST_CASE("prediction margin sweep") {
  Fixture f = make_fixture(2, 80);
  const auto sweep = prediction_margin_sweep(f.model, f.test, f.trie, 5, 0.0, 2);
  CHECK(sweep.evaluated == f.test.size());
  std::size_t wrong = 0, neg = 0, lpos_gneg = 0;
  for (const auto& ex : f.test) {
    const auto r = beam_search(f.model, f.model.encode_context(ex.context), f.trie, 5);
    wrong += r.ranked.empty() || r.ranked.front().sequence != ex.label;
  }
  CHECK(sweep.records.size() + sweep.exhausted == wrong);
  for (const auto& r : sweep.records) {
    neg += r.global_margin < 0;
    lpos_gneg += r.local_margin > 0 && r.global_margin < 0;
  }
  if (!sweep.records.empty()) {
    CHECK(sweep.frac_global_neg == doctest::Approx(static_cast<double>(neg) / sweep.records.size()));
    CHECK(sweep.frac_local_pos_global_neg ==
          doctest::Approx(static_cast<double>(lpos_gneg) / sweep.records.size()));
  }

  // relabel every example with its own prediction: nothing is wrong
  std::vector<Example> fitted;
  for (const auto& ex : f.test) {
    const auto r = beam_search(f.model, f.model.encode_context(ex.context), f.trie, 5);
    fitted.push_back({ex.context, r.ranked.front().sequence});
  }
  CHECK(prediction_margin_sweep(f.model, fitted, f.trie, 5).records.empty());
}

TEST_CASE("margin histogram") {
  CHECK(margin_histogram2d({}, 4).total == 0);
  CHECK_THROWS_AS(margin_histogram2d({}, 1), Error);

  MarginRecord one;
  one.local_margin = 0.2;
  one.global_margin = -1.0;
  const auto h1 = margin_histogram2d(std::vector<MarginRecord>{one}, 5);
  CHECK(std::count_if(h1.counts.begin(), h1.counts.end(), [](auto c) { return c != 0; }) == 1);
  CHECK(h1.quadrant_fractions[0] == 1.0);

  Rng rng(3);
  std::vector<MarginRecord> recs;
  for (int i = 0; i < 400; ++i) {
    MarginRecord r;
    r.local_margin = rng.uniform(-1, 1);
    r.local_margin_log = rng.uniform(-3, 3);
    r.global_margin = rng.bernoulli(0.3) ? r.local_margin_log : rng.uniform(-6, 2);
    recs.push_back(r);
  }
  for (auto scale : {MarginScale::kProbability, MarginScale::kLog}) {
    const auto h = margin_histogram2d(recs, 8, scale);
    std::uint64_t sum = 0;
    for (auto c : h.counts) sum += c;
    CHECK(sum == recs.size());
    CHECK(h.total == recs.size());
    double q = 0.0;
    for (double x : h.quadrant_fractions) q += x;
    CHECK(std::abs(q - 1.0) <= 1e-12);
  }

  std::vector<MarginRecord> spine;
  for (int i = 0; i < 100; ++i) {
    MarginRecord r;
    r.local_margin_log = r.global_margin = rng.uniform(-4, 4);
    spine.push_back(r);
  }
  const auto hs = margin_histogram2d(spine, 10, MarginScale::kLog);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) {
      if (i != j) CHECK(hs.at(i, j) == 0);
    }
  }
}

TEST_CASE("number formatting") {
  CHECK(format_number(1.0) == "1.0");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.5) == "-2.5");
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.index(80)) - 40);
    CHECK(std::stod(format_number(x)) == x);
  }
}

TEST_CASE("report round trips") {
  Table t;
  t.name = "demo";
  t.columns = {"k", "value", "label"};
  t.add_row({std::int64_t{1}, 0.1, std::string("short")});
  t.add_row({std::int64_t{-7}, 1.0 / 3.0, std::string("12")});
  t.add_row({std::int64_t{0}, 1e300, std::string("a,b \"q\"")});
  CHECK(table_from_csv(table_to_csv(t)) == t);
  CHECK(table_from_json(table_to_json(t)) == t);
  CHECK_THROWS_AS(t.add_row({std::int64_t{1}}), Error);

  Table empty;
  empty.name = "empty";
  empty.columns = {"a", "b"};
  const std::string csv = table_to_csv(empty);
  CHECK(csv == "# schema: empty\n# version: 1\na,b\n");
  CHECK(table_from_csv(csv) == empty);

  // the two formats carry the same numbers
  const Table back_csv = table_from_csv(table_to_csv(t)), back_json = table_from_json(table_to_json(t));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double a = std::get<double>(back_csv.rows[r][1]), b = std::get<double>(back_json.rows[r][1]);
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
  }

  const auto path = temp_path("report.csv").string();
  emit_report(t, path, ReportFormat::kCsv);
  CHECK(read_report(path, ReportFormat::kCsv) == t);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(emit_report(t, "/nonexistent_dir/x/y.csv", ReportFormat::kCsv), Error);
}

TEST_CASE("report tables") {
  Fixture f = make_fixture(4);
  const auto sweep = beam_width_sweep(f.model, f.test, f.trie, {1, 5, 10, 15});
  const Table bt = beam_sweep_table(sweep, 0.0);
  CHECK(bt.rows.size() == 40);
  CHECK(bt.column("width") < bt.columns.size());

  RecallTable rt({1, 5});
  rt.add(3, 1);
  CHECK(recall_report_table(rt, 0.5).rows.size() == 2 * kLengthBuckets);

  const auto h = margin_histogram2d(std::vector<MarginRecord>{MarginRecord{}}, 3);
  const auto j = nlohmann::json::parse(histogram_json(h, 0.0));
  CHECK(j.at("schema") == "hist2d");
  CHECK(j.at("total") == 1);
  CHECK(j.at("counts").size() == 3);
}
