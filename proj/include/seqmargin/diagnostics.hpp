#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seqmargin/beam_search.hpp"
#include "seqmargin/corpus.hpp"
#include "seqmargin/ed_model.hpp"

namespace seqmargin {

// Lengths are word counts (BOS and EOS excluded). The divergence position is
// the 0-based index, among the tokens after BOS, of the first difference.
struct MarginRecord {
  double local_margin = 0.0;      // probability scale
  double local_margin_log = 0.0;  // log scale
  double global_margin = 0.0;     // log scale
  std::size_t correct_len = 0;
  std::size_t predicted_len = 0;
  std::size_t first_divergence_pos = 0;
};

MarginRecord margin_pair(const EdModel& model, std::span<const TokenId> context,
                         std::span<const TokenId> y_plus, std::span<const TokenId> y_minus);
MarginRecord margin_pair(const EdModel& model, const Tensor& v_x, std::span<const TokenId> y_plus,
                         std::span<const TokenId> y_minus);

inline constexpr std::size_t kLengthBuckets = 10;
// Exact lengths 1..9 map to buckets 0..8; 10 and above share bucket 9.
// Length 0 is folded into the first bucket.
std::size_t length_bucket(std::size_t word_count);
std::string bucket_label(std::size_t bucket);

struct MarginSweep {
  std::vector<MarginRecord> records;
  std::size_t evaluated = 0;
  std::size_t exhausted = 0;  // beam produced no completion
  double frac_local_pos_global_neg = 0.0;
  double frac_global_neg = 0.0;
};

// Margin records for every example whose width-`width` top-1 differs from
// the truth.
MarginSweep prediction_margin_sweep(const EdModel& model, std::span<const Example> test,
                                    const PrefixTrie& trie, std::size_t width,
                                    double length_norm_f = 0.0, std::size_t threads = 1);
MarginSweep summarize_margins(std::vector<MarginRecord> records, std::size_t evaluated,
                              std::size_t exhausted);

struct RecallCell {
  std::size_t k = 0;
  std::size_t bucket = 0;
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 0;
  double recall() const noexcept {
    return denominator ? static_cast<double>(numerator) / static_cast<double>(denominator) : 0.0;
  }
};

class RecallTable {
 public:
  RecallTable() = default;
  explicit RecallTable(std::vector<std::size_t> ks);

  // rank is the 1-based position of the truth in the ranked list, 0 if absent.
  void add(std::size_t truth_word_count, std::size_t rank);
  void merge(const RecallTable& other);

  const std::vector<std::size_t>& ks() const noexcept { return ks_; }
  const RecallCell& cell(std::size_t k_index, std::size_t bucket) const;
  std::vector<RecallCell> cells() const;
  double overall(std::size_t k_index) const;
  std::uint64_t total() const;

 private:
  std::vector<std::size_t> ks_;
  std::vector<std::array<RecallCell, kLengthBuckets>> cells_;
};

// 1-based rank of `truth` in `ranked`, 0 when missing.
std::size_t rank_of(std::span<const TokenSeq> ranked, std::span<const TokenId> truth);

RecallTable recall_at_k(std::span<const std::vector<TokenSeq>> ranked,
                        std::span<const TokenSeq> truth, std::vector<std::size_t> ks);

struct BeamSweepCell {
  std::size_t width = 0;
  std::size_t bucket = 0;
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
};

struct BeamSweepTable {
  std::vector<std::size_t> widths;
  std::vector<std::array<BeamSweepCell, kLengthBuckets>> cells;
  std::vector<BeamSweepCell> rows() const;
  std::uint64_t correct(std::size_t width_index, std::size_t bucket) const {
    return cells[width_index][bucket].correct;
  }
  std::uint64_t total(std::size_t width_index) const;
};

BeamSweepTable beam_width_sweep(const EdModel& model, std::span<const Example> test,
                                const PrefixTrie& trie, std::vector<std::size_t> widths,
                                double length_norm_f = 0.0, std::size_t threads = 1);

enum class MarginScale { kProbability, kLog };

struct Histogram2d {
  std::size_t bins = 0;
  MarginScale scale = MarginScale::kProbability;
  std::vector<double> global_edges;  // x axis
  std::vector<double> local_edges;   // y axis
  std::vector<std::uint64_t> counts;  // row-major [local_bin][global_bin]
  std::uint64_t total = 0;
  // (local > 0, global < 0), (local > 0, global >= 0), (local <= 0, global < 0),
  // (local <= 0, global >= 0)
  std::array<double, 4> quadrant_fractions{};
  double frac_global_negative = 0.0;
  double mean_local = 0.0;
  double mean_global = 0.0;

  std::uint64_t at(std::size_t local_bin, std::size_t global_bin) const {
    return counts[local_bin * bins + global_bin];
  }
};

// With the log scale both axes share one range so equal margins fall on the
// diagonal.
Histogram2d margin_histogram2d(std::span<const MarginRecord> records, std::size_t bins,
                               MarginScale scale = MarginScale::kProbability);

// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace seqmargin
