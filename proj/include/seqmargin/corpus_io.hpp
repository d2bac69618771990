#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqmargin/corpus.hpp"

namespace seqmargin {

// One "context<TAB>label" pair per line. Multi-turn contexts join turns with
// " | ". Both sides are run through tokenize().
struct TextPair {
  std::vector<std::string> context;
  std::vector<std::string> label;
};

struct ReadStats {
  std::size_t lines = 0;      // non-blank lines seen
  std::size_t malformed = 0;  // skipped
};

inline constexpr double kMaxMalformedFraction = 0.01;

// Lines without exactly one TAB or with an empty side are skipped and
// counted. Fails when the input has no usable lines or more than 1% of the
// lines are malformed.
std::vector<TextPair> parse_pairs(const std::string& text, ReadStats* stats = nullptr,
                                  const std::string& origin = "<input>");
std::vector<TextPair> read_pairs(const std::string& path, ReadStats* stats = nullptr);

std::vector<Example> encode_pairs(const std::vector<TextPair>& pairs, const Vocab& vocab);

// vocab.txt: one token per line in id order.
std::string vocab_to_text(const Vocab& vocab);
Vocab vocab_from_text(const std::string& text);

// "count<TAB>space-joined label words" per line, BOS/EOS omitted.
std::string counted_to_text(const std::vector<CountedSequence>& seqs, const Vocab& vocab);
std::vector<CountedSequence> counted_from_text(const std::string& text, const Vocab& vocab);

// trie.txt: every root-to-leaf path as space-separated token ids.
std::string trie_to_text(const PrefixTrie& trie);

struct CorpusOptions {
  std::size_t vocab_cap = 2000;
  std::size_t whitelist_size = 200;
  std::size_t pool_size = 500;
  std::size_t max_label_len = 100;  // tokens after BOS, EOS included
};

struct CorpusArtifacts {
  Vocab vocab;
  std::vector<CountedSequence> whitelist;
  std::vector<CountedSequence> pool;
  std::vector<Example> train;
  ReadStats stats;
};

// Writes vocab.txt, whitelist.txt, pool.txt, trie.txt, train.tsv and
// manifest.txt (file name, FNV-1a content hash, plus the vocabulary hash).
CorpusArtifacts build_corpus(const std::string& input_path, const std::string& out_dir,
                             const CorpusOptions& opts);

struct CorpusDir {
  Vocab vocab;
  std::vector<CountedSequence> whitelist;
  std::vector<CountedSequence> pool;
  std::string dir;

  std::vector<TokenSeq> whitelist_sequences() const;
  NegativePool negative_pool(std::size_t max_len) const;
  std::vector<Example> train_examples() const;
};

CorpusDir load_corpus_dir(const std::string& dir);

std::uint64_t content_hash(const std::string& bytes);

}  // namespace seqmargin
