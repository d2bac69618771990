#include "seqmargin/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "seqmargin/error.hpp"

namespace seqmargin {

MarginRecord margin_pair(const EdModel& model, std::span<const TokenId> context,
                         std::span<const TokenId> y_plus, std::span<const TokenId> y_minus) {
  return margin_pair(model, model.encode_context(context), y_plus, y_minus);
}

MarginRecord margin_pair(const EdModel& model, const Tensor& v_x, std::span<const TokenId> y_plus,
                         std::span<const TokenId> y_minus) {
  validate_label(y_plus);
  validate_label(y_minus);
  if (std::equal(y_plus.begin(), y_plus.end(), y_minus.begin(), y_minus.end())) {
    fail(ErrorCode::kArgument, "margin_pair needs two different sequences");
  }
  const std::size_t limit = model.dims().unroll_limit;
  check_label_length(y_plus, limit);
  check_label_length(y_minus, limit);

  // Both end in a single EOS, so they must differ at or before the shorter end.
  std::size_t j = 1;
  while (y_plus[j] == y_minus[j]) ++j;

  EdModel::State state = model.initial_state(v_x);
  for (std::size_t t = 0; t < j; ++t) state = model.advance(state, y_plus[t]);
  std::vector<double> lp;
  model.next_logprobs(state, lp);
  const double lp_plus = lp[static_cast<std::size_t>(y_plus[j])];
  const double lp_minus = lp[static_cast<std::size_t>(y_minus[j])];

  MarginRecord r;
  r.local_margin = std::exp(lp_plus) - std::exp(lp_minus);
  r.local_margin_log = lp_plus - lp_minus;
  r.global_margin = model.sequence_logprob(v_x, y_plus) - model.sequence_logprob(v_x, y_minus);
  r.correct_len = label_word_count(y_plus);
  r.predicted_len = label_word_count(y_minus);
  r.first_divergence_pos = j - 1;
  return r;
}

std::size_t length_bucket(std::size_t word_count) {
  if (word_count <= 1) return 0;
  return std::min(word_count, kLengthBuckets) - 1;
}

std::string bucket_label(std::size_t bucket) {
  if (bucket >= kLengthBuckets) fail(ErrorCode::kArgument, "bucket out of range");
  if (bucket + 1 == kLengthBuckets) return std::to_string(kLengthBuckets) + "+";
  return std::to_string(bucket + 1);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

MarginSweep summarize_margins(std::vector<MarginRecord> records, std::size_t evaluated,
                              std::size_t exhausted) {
  MarginSweep out;
  out.evaluated = evaluated;
  out.exhausted = exhausted;
  std::size_t both = 0, neg = 0;
  for (const auto& r : records) {
    if (r.global_margin < 0) {
      ++neg;
      if (r.local_margin > 0) ++both;
    }
  }
  if (!records.empty()) {
    out.frac_local_pos_global_neg = static_cast<double>(both) / static_cast<double>(records.size());
    out.frac_global_neg = static_cast<double>(neg) / static_cast<double>(records.size());
  }
  out.records = std::move(records);
  return out;
}

MarginSweep prediction_margin_sweep(const EdModel& model, std::span<const Example> test,
                                    const PrefixTrie& trie, std::size_t width,
                                    double length_norm_f, std::size_t threads) {
  enum class Outcome { kCorrect, kWrong, kExhausted, kSkipped };
  std::vector<Outcome> outcome(test.size(), Outcome::kCorrect);
  std::vector<MarginRecord> rec(test.size());
  const std::size_t limit = model.dims().unroll_limit;
  parallel_for(test.size(), threads, [&](std::size_t i) {
    const Example& ex = test[i];
    if (ex.label.size() < 2 || ex.label.size() - 1 > limit) {
      outcome[i] = Outcome::kSkipped;
      return;
    }
    const Tensor v_x = model.encode_context(ex.context);
    const BeamResult br = beam_search(model, v_x, trie, width, length_norm_f);
    if (br.ranked.empty()) {
      outcome[i] = Outcome::kExhausted;
      return;
    }
    const TokenSeq& top = br.ranked.front().sequence;
    if (top == ex.label) return;
    outcome[i] = Outcome::kWrong;
    rec[i] = margin_pair(model, v_x, ex.label, top);
  });
  std::vector<MarginRecord> records;
  std::size_t evaluated = 0, exhausted = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (outcome[i] == Outcome::kSkipped) continue;
    ++evaluated;
    if (outcome[i] == Outcome::kExhausted) ++exhausted;
    if (outcome[i] == Outcome::kWrong) records.push_back(rec[i]);
  }
  return summarize_margins(std::move(records), evaluated, exhausted);
}

RecallTable::RecallTable(std::vector<std::size_t> ks) : ks_(std::move(ks)) {
  if (ks_.empty()) fail(ErrorCode::kArgument, "recall needs at least one K");
  for (auto k : ks_) {
    if (k == 0) fail(ErrorCode::kArgument, "K must be positive");
  }
  std::sort(ks_.begin(), ks_.end());
  ks_.erase(std::unique(ks_.begin(), ks_.end()), ks_.end());
  cells_.resize(ks_.size());
  for (std::size_t a = 0; a < ks_.size(); ++a) {
    for (std::size_t b = 0; b < kLengthBuckets; ++b) {
      cells_[a][b].k = ks_[a];
      cells_[a][b].bucket = b;
    }
  }
}

void RecallTable::add(std::size_t truth_word_count, std::size_t rank) {
  const std::size_t b = length_bucket(truth_word_count);
  for (std::size_t a = 0; a < ks_.size(); ++a) {
    auto& c = cells_[a][b];
    ++c.denominator;
    if (rank != 0 && rank <= ks_[a]) ++c.numerator;
  }
}

void RecallTable::merge(const RecallTable& other) {
  if (other.ks_ != ks_) fail(ErrorCode::kArgument, "cannot merge recall tables with different K");
  for (std::size_t a = 0; a < ks_.size(); ++a) {
    for (std::size_t b = 0; b < kLengthBuckets; ++b) {
      cells_[a][b].numerator += other.cells_[a][b].numerator;
      cells_[a][b].denominator += other.cells_[a][b].denominator;
    }
  }
}

const RecallCell& RecallTable::cell(std::size_t k_index, std::size_t bucket) const {
  return cells_.at(k_index).at(bucket);
}

std::vector<RecallCell> RecallTable::cells() const {
  std::vector<RecallCell> out;
  for (const auto& row : cells_) out.insert(out.end(), row.begin(), row.end());
  return out;
}

double RecallTable::overall(std::size_t k_index) const {
  std::uint64_t num = 0, den = 0;
  for (const auto& c : cells_.at(k_index)) {
    num += c.numerator;
    den += c.denominator;
  }
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

std::uint64_t RecallTable::total() const {
  std::uint64_t den = 0;
  if (!cells_.empty()) {
    for (const auto& c : cells_.front()) den += c.denominator;
  }
  return den;
}

std::size_t rank_of(std::span<const TokenSeq> ranked, std::span<const TokenId> truth) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (std::equal(ranked[i].begin(), ranked[i].end(), truth.begin(), truth.end())) return i + 1;
  }
  return 0;
}

RecallTable recall_at_k(std::span<const std::vector<TokenSeq>> ranked,
                        std::span<const TokenSeq> truth, std::vector<std::size_t> ks) {
  if (ranked.size() != truth.size()) {
    fail(ErrorCode::kArgument, "ranked lists and truths differ in count");
  }
  RecallTable table(std::move(ks));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    table.add(label_word_count(truth[i]), rank_of(ranked[i], truth[i]));
  }
  return table;
}

std::vector<BeamSweepCell> BeamSweepTable::rows() const {
  std::vector<BeamSweepCell> out;
  for (const auto& row : cells) out.insert(out.end(), row.begin(), row.end());
  return out;
}

std::uint64_t BeamSweepTable::total(std::size_t width_index) const {
  std::uint64_t n = 0;
  for (const auto& c : cells.at(width_index)) n += c.total;
  return n;
}

BeamSweepTable beam_width_sweep(const EdModel& model, std::span<const Example> test,
                                const PrefixTrie& trie, std::vector<std::size_t> widths,
                                double length_norm_f, std::size_t threads) {
  if (widths.empty()) fail(ErrorCode::kArgument, "beam sweep needs at least one width");
  for (auto w : widths) {
    if (w == 0) fail(ErrorCode::kArgument, "beam width must be positive");
  }
  BeamSweepTable table;
  table.widths = widths;
  table.cells.resize(widths.size());
  for (std::size_t a = 0; a < widths.size(); ++a) {
    for (std::size_t b = 0; b < kLengthBuckets; ++b) {
      table.cells[a][b].width = widths[a];
      table.cells[a][b].bucket = b;
    }
  }
  // hit[i * W + a]
  std::vector<char> hit(test.size() * widths.size(), 0);
  parallel_for(test.size(), threads, [&](std::size_t i) {
    const Tensor v_x = model.encode_context(test[i].context);
    for (std::size_t a = 0; a < widths.size(); ++a) {
      const BeamResult br = beam_search(model, v_x, trie, widths[a], length_norm_f);
      hit[i * widths.size() + a] = !br.ranked.empty() && br.ranked.front().sequence == test[i].label;
    }
  });
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::size_t b = length_bucket(label_word_count(test[i].label));
    for (std::size_t a = 0; a < widths.size(); ++a) {
      ++table.cells[a][b].total;
      table.cells[a][b].correct += hit[i * widths.size() + a] ? 1 : 0;
    }
  }
  return table;
}

namespace {

std::vector<double> linear_edges(double lo, double hi, std::size_t bins) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  e.back() = hi;
  return e;
}

std::size_t bin_of(const std::vector<double>& edges, double v) {
  const std::size_t bins = edges.size() - 1;
  auto it = std::upper_bound(edges.begin(), edges.end(), v);
  std::size_t idx = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
  return std::min(idx, bins - 1);
}

}  // namespace

Histogram2d margin_histogram2d(std::span<const MarginRecord> records, std::size_t bins,
                               MarginScale scale) {
  if (bins < 2) fail(ErrorCode::kArgument, "histogram needs at least 2 bins per axis");
  Histogram2d h;
  h.bins = bins;
  h.scale = scale;
  h.counts.assign(bins * bins, 0);
  auto local_of = [&](const MarginRecord& r) {
    return scale == MarginScale::kProbability ? r.local_margin : r.local_margin_log;
  };

  double gmin = std::numeric_limits<double>::infinity(), gmax = -gmin;
  double lmin = gmin, lmax = -gmin;
  for (const auto& r : records) {
    gmin = std::min(gmin, r.global_margin);
    gmax = std::max(gmax, r.global_margin);
    lmin = std::min(lmin, local_of(r));
    lmax = std::max(lmax, local_of(r));
  }
  if (records.empty()) {
    gmin = lmin = -1.0;
    gmax = lmax = 1.0;
  }
  if (scale == MarginScale::kProbability) {
    h.local_edges = linear_edges(-1.0, 1.0, bins);
    h.global_edges = linear_edges(gmin, gmax, bins);
  } else {
    h.global_edges = linear_edges(std::min(gmin, lmin), std::max(gmax, lmax), bins);
    h.local_edges = h.global_edges;
  }

  std::array<std::uint64_t, 4> quad{};
  double sum_l = 0.0, sum_g = 0.0;
  std::uint64_t gneg = 0;
  for (const auto& r : records) {
    const double l = local_of(r);
    ++h.counts[bin_of(h.local_edges, l) * bins + bin_of(h.global_edges, r.global_margin)];
    const bool lp = l > 0, gn = r.global_margin < 0;
    ++quad[lp ? (gn ? 0 : 1) : (gn ? 2 : 3)];
    gneg += gn;
    sum_l += l;
    sum_g += r.global_margin;
  }
  h.total = records.size();
  if (h.total) {
    const double n = static_cast<double>(h.total);
    for (std::size_t q = 0; q < 4; ++q) h.quadrant_fractions[q] = static_cast<double>(quad[q]) / n;
    h.frac_global_negative = static_cast<double>(gneg) / n;
    h.mean_local = sum_l / n;
    h.mean_global = sum_g / n;
  }
  return h;
}

}  // namespace seqmargin
