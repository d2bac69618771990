#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqmargin {

class Rng;

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Lowercases, splits on whitespace and separates every maximal run of ASCII
// punctuation into its own token. Bytes >= 0x80 are treated as word bytes.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::size_t kReserved = 3;
  static constexpr std::string_view kUnkSurface = "<unk>";
  static constexpr std::string_view kBosSurface = "<s>";
  static constexpr std::string_view kEosSurface = "</s>";

  Vocab();
  // Rebuilds a vocabulary from an id-ordered token list whose first three
  // entries are the reserved surfaces.
  static Vocab from_tokens(std::vector<std::string> id_to_token);

  std::size_t size() const noexcept { return id_to_token_.size(); }
  TokenId id(std::string_view token) const;  // UNK when absent
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }
  std::uint64_t hash() const noexcept;

 private:
  void add(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

// The cap most frequent tokens (ties lexicographic) plus the reserved three.
Vocab build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t cap);

enum class SequenceRole { kContext, kLabel };

TokenSeq encode(std::span<const std::string> tokens, const Vocab& vocab, SequenceRole role);
// Drops BOS/EOS; UNK decodes to its surface form.
std::vector<std::string> decode(std::span<const TokenId> ids, const Vocab& vocab);
std::string join_tokens(std::span<const std::string> tokens);

struct Example {
  TokenSeq context;  // BOS-prefixed
  TokenSeq label;    // BOS-prefixed, EOS-terminated
};

// Number of word tokens in a BOS..EOS label.
std::size_t label_word_count(std::span<const TokenId> label);
// Throws unless `label` is BOS-prefixed and carries EOS exactly once, last.
void validate_label(std::span<const TokenId> label, TokenId bos = Vocab::kBos,
                    TokenId eos = Vocab::kEos);

// A sequence with its corpus frequency, ordered by (count desc, ids asc).
struct CountedSequence {
  TokenSeq sequence;
  std::uint64_t count = 0;
};

std::vector<CountedSequence> count_sequences(std::span<const TokenSeq> sequences);

struct NegativeSample {
  std::size_t index = 0;  // into NegativePool::sequences()
  double q = 0.0;         // proposal probability after exclusion
};

class NegativePool {
 public:
  NegativePool(std::vector<TokenSeq> sequences, std::vector<double> prior);

  std::span<const TokenSeq> sequences() const noexcept { return sequences_; }
  std::span<const double> prior() const noexcept { return prior_; }
  std::size_t size() const noexcept { return sequences_.size(); }
  std::optional<std::size_t> find(std::span<const TokenId> seq) const;

  // k i.i.d. draws from Q renormalized over the pool minus `exclude`.
  std::vector<NegativeSample> sample(std::size_t k, std::span<const TokenId> exclude,
                                     Rng& rng) const;

 private:
  std::vector<TokenSeq> sequences_;
  std::vector<double> prior_;
  std::vector<double> cumulative_;  // cumulative_[i] = sum of prior_[0..i)
  std::map<TokenSeq, std::size_t> index_;
};

// The T most frequent labels of content length (tokens after BOS) at most
// max_len, with Q(y) = freq(y) / sum of pool frequencies.
NegativePool build_negative_pool(std::span<const TokenSeq> labels, std::size_t pool_size,
                                 std::size_t max_len);
NegativePool build_negative_pool(std::span<const CountedSequence> counted,
                                 std::size_t pool_size, std::size_t max_len);

std::vector<NegativeSample> sample_negatives(const NegativePool& pool, std::size_t k,
                                             std::span<const TokenId> exclude, Rng& rng);

// Most frequent labels that contain no UNK, truncated to `size`.
std::vector<TokenSeq> build_whitelist(std::span<const TokenSeq> labels, std::size_t size);
std::vector<CountedSequence> build_whitelist_counted(std::span<const CountedSequence> counted,
                                                     std::size_t size);

class PrefixTrie {
 public:
  struct Node {
    std::map<TokenId, std::size_t> children;
    bool terminal = false;
    std::size_t sequence = 0;  // index into sequences() when terminal
    std::size_t parent = 0;
    TokenId token = 0;
  };

  static constexpr std::size_t kRoot = 0;

  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::span<const TokenSeq> sequences() const noexcept { return sequences_; }
  bool empty() const noexcept { return sequences_.empty(); }
  std::optional<std::size_t> child(std::size_t node, TokenId token) const;
  bool accepts(std::span<const TokenId> seq) const;
  // All root-to-terminal paths in lexicographic order.
  std::vector<TokenSeq> paths() const;
  TokenId eos() const noexcept { return eos_; }

  friend PrefixTrie build_prefix_trie(std::span<const TokenSeq> sequences, TokenId eos);

 private:
  std::vector<Node> nodes_;
  std::vector<TokenSeq> sequences_;
  TokenId eos_ = Vocab::kEos;
};

// Sequences must be non-empty and end in EOS (and contain it nowhere else).
// Duplicates are dropped.
PrefixTrie build_prefix_trie(std::span<const TokenSeq> sequences, TokenId eos = Vocab::kEos);

// Removes a leading BOS from every sequence.
std::vector<TokenSeq> strip_bos(std::span<const TokenSeq> labels);

}  // namespace seqmargin
