#include "seqmargin/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "seqmargin/error.hpp"
#include "seqmargin/hash.hpp"
#include "seqmargin/random.hpp"

namespace seqmargin {

namespace {

bool is_punct(unsigned char ch) { return ch < 0x80 && std::ispunct(ch); }
bool is_space(unsigned char ch) { return ch < 0x80 && std::isspace(ch); }

bool is_reserved(std::string_view t) {
  return t == Vocab::kUnkSurface || t == Vocab::kBosSurface || t == Vocab::kEosSurface;
}

bool by_count_then_ids(const CountedSequence& a, const CountedSequence& b) {
  if (a.count != b.count) return a.count > b.count;
  return a.sequence < b.sequence;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  bool current_punct = false;
  const auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char ch : text) {
    if (is_space(ch)) {
      flush();
      continue;
    }
    const bool punct = is_punct(ch);
    if (!current.empty() && punct != current_punct) flush();
    current_punct = punct;
    current.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch));
  }
  flush();
  return out;
}

Vocab::Vocab() {
  add(std::string(kUnkSurface));
  add(std::string(kBosSurface));
  add(std::string(kEosSurface));
}

void Vocab::add(std::string token) {
  const auto id = static_cast<TokenId>(id_to_token_.size());
  if (!token_to_id_.emplace(token, id).second) {
    fail(ErrorCode::kConstruction, "vocabulary token '" + token + "' appears twice");
  }
  id_to_token_.push_back(std::move(token));
}

Vocab Vocab::from_tokens(std::vector<std::string> id_to_token) {
  if (id_to_token.size() < kReserved || id_to_token[kUnk] != kUnkSurface ||
      id_to_token[kBos] != kBosSurface || id_to_token[kEos] != kEosSurface) {
    fail(ErrorCode::kFormat, "vocabulary must start with the reserved <unk>, <s>, </s> entries");
  }
  Vocab v;
  for (std::size_t i = kReserved; i < id_to_token.size(); ++i) v.add(std::move(id_to_token[i]));
  return v;
}

TokenId Vocab::id(std::string_view token) const { return find(token).value_or(kUnk); }

std::optional<TokenId> Vocab::find(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    fail(ErrorCode::kArgument, "token id " + std::to_string(id) + " outside the vocabulary");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocab::hash() const noexcept {
  Fnv1a h;
  h.u64(id_to_token_.size());
  for (const auto& t : id_to_token_) h.str(t);
  return h.digest();
}

Vocab build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t cap) {
  if (cap == 0) fail(ErrorCode::kArgument, "build_vocab: cap must be at least 1");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& line : corpus) {
    for (const auto& t : line) {
      if (!is_reserved(t)) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);
  std::vector<std::string> tokens{std::string(Vocab::kUnkSurface),
                                  std::string(Vocab::kBosSurface),
                                  std::string(Vocab::kEosSurface)};
  for (auto& [t, n] : ranked) tokens.push_back(t);
  return Vocab::from_tokens(std::move(tokens));
}

TokenSeq encode(std::span<const std::string> tokens, const Vocab& vocab, SequenceRole role) {
  TokenSeq out;
  out.reserve(tokens.size() + 2);
  out.push_back(Vocab::kBos);
  for (const auto& t : tokens) out.push_back(vocab.id(t));
  if (role == SequenceRole::kLabel) out.push_back(Vocab::kEos);
  return out;
}

std::vector<std::string> decode(std::span<const TokenId> ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == Vocab::kBos || id == Vocab::kEos) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::size_t label_word_count(std::span<const TokenId> label) {
  std::size_t n = 0;
  for (TokenId t : label) {
    if (t != Vocab::kBos && t != Vocab::kEos) ++n;
  }
  return n;
}

void validate_label(std::span<const TokenId> label, TokenId bos, TokenId eos) {
  // Counting from index 1 so BOS == EOS (single-token vocabularies) still works.
  if (label.size() < 2 || label.front() != bos || label.back() != eos ||
      std::count(label.begin() + 1, label.end(), eos) != 1) {
    fail(ErrorCode::kArgument, "label must be BOS-prefixed and end with a single EOS");
  }
}

std::vector<CountedSequence> count_sequences(std::span<const TokenSeq> sequences) {
  std::map<TokenSeq, std::uint64_t> counts;
  for (const auto& s : sequences) ++counts[s];
  std::vector<CountedSequence> out;
  out.reserve(counts.size());
  for (auto& [seq, n] : counts) out.push_back({seq, n});
  std::stable_sort(out.begin(), out.end(), by_count_then_ids);
  return out;
}

NegativePool::NegativePool(std::vector<TokenSeq> sequences, std::vector<double> prior)
    : sequences_(std::move(sequences)), prior_(std::move(prior)) {
  if (sequences_.size() != prior_.size()) {
    fail(ErrorCode::kConstruction, "negative pool: sequence and prior counts differ");
  }
  if (sequences_.empty()) fail(ErrorCode::kConstruction, "negative pool is empty");
  double total = 0.0;
  cumulative_.reserve(prior_.size());
  for (std::size_t i = 0; i < prior_.size(); ++i) {
    if (!(prior_[i] > 0.0)) fail(ErrorCode::kConstruction, "negative pool prior must be positive");
    if (!index_.emplace(sequences_[i], i).second) {
      fail(ErrorCode::kConstruction, "negative pool sequences must be unique");
    }
    cumulative_.push_back(total);
    total += prior_[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    fail(ErrorCode::kConstruction, "negative pool prior does not sum to one");
  }
}

std::optional<std::size_t> NegativePool::find(std::span<const TokenId> seq) const {
  const auto it = index_.find(TokenSeq(seq.begin(), seq.end()));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<NegativeSample> NegativePool::sample(std::size_t k, std::span<const TokenId> exclude,
                                                 Rng& rng) const {
  if (k == 0) fail(ErrorCode::kArgument, "sample_negatives: k must be at least 1");
  const auto excluded = find(exclude);
  const double total = cumulative_.back() + prior_.back();
  double gap_start = total, gap_mass = 0.0;
  if (excluded) {
    gap_start = cumulative_[*excluded];
    gap_mass = prior_[*excluded];
  }
  const double mass = total - gap_mass;
  if (sequences_.size() - (excluded ? 1 : 0) == 0 || !(mass > 0.0)) {
    fail(ErrorCode::kSampling, "sample_negatives: pool is empty after excluding the label");
  }
  std::vector<NegativeSample> out;
  out.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    double u = rng.uniform() * mass;
    if (u >= gap_start) u += gap_mass;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    if (excluded && i == *excluded) i = (i + 1 < size()) ? i + 1 : i - 1;
    out.push_back({i, prior_[i] / mass});
  }
  return out;
}

NegativePool build_negative_pool(std::span<const CountedSequence> counted, std::size_t pool_size,
                                 std::size_t max_len) {
  if (pool_size < 2) fail(ErrorCode::kArgument, "negative pool size must be at least 2");
  std::vector<CountedSequence> kept;
  for (const auto& cs : counted) {
    const std::size_t content = cs.sequence.empty() ? 0 : cs.sequence.size() - 1;
    if (content <= max_len) kept.push_back(cs);
  }
  std::stable_sort(kept.begin(), kept.end(), by_count_then_ids);
  if (kept.size() > pool_size) kept.resize(pool_size);
  if (kept.size() < 2) {
    fail(ErrorCode::kConstruction,
         "negative pool needs at least 2 distinct label sequences, found " +
             std::to_string(kept.size()));
  }
  double total = 0.0;
  for (const auto& cs : kept) total += static_cast<double>(cs.count);
  std::vector<TokenSeq> seqs;
  std::vector<double> prior;
  for (auto& cs : kept) {
    seqs.push_back(cs.sequence);
    prior.push_back(static_cast<double>(cs.count) / total);
  }
  return NegativePool(std::move(seqs), std::move(prior));
}

NegativePool build_negative_pool(std::span<const TokenSeq> labels, std::size_t pool_size,
                                 std::size_t max_len) {
  const auto counted = count_sequences(labels);
  return build_negative_pool(counted, pool_size, max_len);
}

std::vector<NegativeSample> sample_negatives(const NegativePool& pool, std::size_t k,
                                             std::span<const TokenId> exclude, Rng& rng) {
  return pool.sample(k, exclude, rng);
}

std::vector<CountedSequence> build_whitelist_counted(std::span<const CountedSequence> counted,
                                                     std::size_t size) {
  if (size == 0) fail(ErrorCode::kArgument, "whitelist size must be at least 1");
  std::vector<CountedSequence> out;
  for (const auto& cs : counted) {
    if (std::find(cs.sequence.begin(), cs.sequence.end(), Vocab::kUnk) != cs.sequence.end()) {
      continue;
    }
    out.push_back(cs);
  }
  std::stable_sort(out.begin(), out.end(), by_count_then_ids);
  if (out.size() > size) out.resize(size);
  return out;
}

std::vector<TokenSeq> build_whitelist(std::span<const TokenSeq> labels, std::size_t size) {
  const auto counted = count_sequences(labels);
  std::vector<TokenSeq> out;
  for (auto& cs : build_whitelist_counted(counted, size)) out.push_back(std::move(cs.sequence));
  return out;
}

std::optional<std::size_t> PrefixTrie::child(std::size_t node, TokenId token) const {
  const auto& kids = nodes_.at(node).children;
  const auto it = kids.find(token);
  if (it == kids.end()) return std::nullopt;
  return it->second;
}

bool PrefixTrie::accepts(std::span<const TokenId> seq) const {
  std::size_t n = kRoot;
  for (TokenId t : seq) {
    const auto next = child(n, t);
    if (!next) return false;
    n = *next;
  }
  return nodes_[n].terminal;
}

std::vector<TokenSeq> PrefixTrie::paths() const {
  std::vector<TokenSeq> out;
  TokenSeq prefix;
  const auto walk = [&](auto&& self, std::size_t n) -> void {
    if (nodes_[n].terminal) out.push_back(prefix);
    for (const auto& [tok, kid] : nodes_[n].children) {
      prefix.push_back(tok);
      self(self, kid);
      prefix.pop_back();
    }
  };
  walk(walk, kRoot);
  return out;
}

PrefixTrie build_prefix_trie(std::span<const TokenSeq> sequences, TokenId eos) {
  PrefixTrie trie;
  trie.eos_ = eos;
  trie.nodes_.emplace_back();
  for (const auto& seq : sequences) {
    if (seq.empty() || seq.back() != eos ||
        std::count(seq.begin(), seq.end(), eos) != 1) {
      fail(ErrorCode::kArgument, "trie sequences must be non-empty and end with a single EOS");
    }
    std::size_t n = PrefixTrie::kRoot;
    for (TokenId t : seq) {
      auto& kids = trie.nodes_[n].children;
      const auto it = kids.find(t);
      if (it != kids.end()) {
        n = it->second;
        continue;
      }
      const std::size_t fresh = trie.nodes_.size();
      kids.emplace(t, fresh);
      PrefixTrie::Node node;
      node.parent = n;
      node.token = t;
      trie.nodes_.push_back(std::move(node));
      n = fresh;
    }
    if (!trie.nodes_[n].terminal) {
      trie.nodes_[n].terminal = true;
      trie.nodes_[n].sequence = trie.sequences_.size();
      trie.sequences_.push_back(seq);
    }
  }
  return trie;
}

std::vector<TokenSeq> strip_bos(std::span<const TokenSeq> labels) {
  std::vector<TokenSeq> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    if (!l.empty() && l.front() == Vocab::kBos) {
      out.emplace_back(l.begin() + 1, l.end());
    } else {
      out.push_back(l);
    }
  }
  return out;
}

}  // namespace seqmargin
