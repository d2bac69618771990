#include "seqmargin/corpus_io.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include "seqmargin/error.hpp"
#include "seqmargin/hash.hpp"
#include "seqmargin/report.hpp"

namespace seqmargin {

namespace fs = std::filesystem;

std::uint64_t content_hash(const std::string& bytes) {
  Fnv1a h;
  h.bytes(bytes.data(), bytes.size());
  return h.digest();
}

namespace {

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

std::vector<TextPair> parse_pairs(const std::string& text, ReadStats* stats, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  ReadStats st;
  std::vector<TextPair> out;
  std::size_t lineno = 0, reported = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    ++st.lines;
    const auto tab = line.find('\t');
    bool ok = tab != std::string::npos && line.find('\t', tab + 1) == std::string::npos;
    TextPair p;
    if (ok) {
      p.context = tokenize(std::string_view(line).substr(0, tab));
      p.label = tokenize(std::string_view(line).substr(tab + 1));
      ok = !p.context.empty() && !p.label.empty();
    }
    if (!ok) {
      ++st.malformed;
      if (reported++ < 5) std::cerr << "warning: " << origin << ":" << lineno << ": malformed line skipped\n";
      continue;
    }
    out.push_back(std::move(p));
  }
  if (stats) *stats = st;
  if (st.lines == 0) fail(ErrorCode::kFormat, origin + " contains no pairs");
  if (static_cast<double>(st.malformed) > kMaxMalformedFraction * static_cast<double>(st.lines)) {
    fail(ErrorCode::kFormat, origin + ": " + std::to_string(st.malformed) + " of " +
                                 std::to_string(st.lines) + " lines are malformed (limit 1%)");
  }
  if (st.malformed) {
    std::cerr << "warning: " << origin << ": skipped " << st.malformed << " malformed line(s)\n";
  }
  return out;
}

std::vector<TextPair> read_pairs(const std::string& path, ReadStats* stats) {
  return parse_pairs(read_text_file(path), stats, path);
}

std::vector<Example> encode_pairs(const std::vector<TextPair>& pairs, const Vocab& vocab) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({encode(p.context, vocab, SequenceRole::kContext),
                   encode(p.label, vocab, SequenceRole::kLabel)});
  }
  return out;
}

std::string vocab_to_text(const Vocab& vocab) {
  std::string out;
  for (const auto& t : vocab.tokens()) out += t + "\n";
  return out;
}

Vocab vocab_from_text(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab::from_tokens(std::move(tokens));
}

std::string counted_to_text(const std::vector<CountedSequence>& seqs, const Vocab& vocab) {
  std::string out;
  for (const auto& cs : seqs) {
    out += std::to_string(cs.count) + "\t" + join_tokens(decode(cs.sequence, vocab)) + "\n";
  }
  return out;
}

std::vector<CountedSequence> counted_from_text(const std::string& text, const Vocab& vocab) {
  std::istringstream is(text);
  std::vector<CountedSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    CountedSequence cs;
    try {
      if (tab == std::string::npos) throw std::invalid_argument("no tab");
      std::size_t used = 0;
      cs.count = std::stoull(line.substr(0, tab), &used);
      if (used != tab || cs.count == 0) throw std::invalid_argument("bad count");
    } catch (const std::exception&) {
      fail(ErrorCode::kFormat, "bad count line " + std::to_string(lineno) + ": " + line);
    }
    std::istringstream ws(line.substr(tab + 1));
    std::vector<std::string> words;
    std::string w;
    while (ws >> w) words.push_back(w);
    cs.sequence = encode(words, vocab, SequenceRole::kLabel);
    out.push_back(std::move(cs));
  }
  return out;
}

std::string trie_to_text(const PrefixTrie& trie) {
  std::string out;
  for (const auto& path : trie.paths()) {
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(path[i]);
    }
    out += '\n';
  }
  return out;
}

CorpusArtifacts build_corpus(const std::string& input_path, const std::string& out_dir,
                             const CorpusOptions& opts) {
  if (opts.vocab_cap == 0 || opts.whitelist_size == 0 || opts.pool_size < 2 || opts.max_label_len == 0) {
    fail(ErrorCode::kUsage, "corpus options must be positive (pool size at least 2)");
  }
  CorpusArtifacts art;
  const auto pairs = read_pairs(input_path, &art.stats);

  std::vector<std::vector<std::string>> docs;
  docs.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    docs.push_back(p.context);
    docs.push_back(p.label);
  }
  art.vocab = build_vocab(docs, opts.vocab_cap);
  art.train = encode_pairs(pairs, art.vocab);

  std::vector<TokenSeq> labels;
  labels.reserve(art.train.size());
  for (const auto& ex : art.train) labels.push_back(ex.label);
  const auto counted = count_sequences(labels);

  std::vector<CountedSequence> bounded;
  for (const auto& cs : counted) {
    if (cs.sequence.size() - 1 <= opts.max_label_len) bounded.push_back(cs);
  }
  art.whitelist = build_whitelist_counted(bounded, opts.whitelist_size);
  art.pool = bounded;
  if (art.pool.size() > opts.pool_size) art.pool.resize(opts.pool_size);
  if (art.pool.size() < 2) {
    fail(ErrorCode::kConstruction, "corpus has fewer than 2 distinct labels for the negative pool");
  }
  if (art.whitelist.empty()) fail(ErrorCode::kConstruction, "whitelist is empty");

  std::vector<TokenSeq> wl;
  for (const auto& cs : art.whitelist) wl.push_back(cs.sequence);
  const auto stripped = strip_bos(wl);
  const PrefixTrie trie = build_prefix_trie(stripped, Vocab::kEos);

  std::string train_tsv;
  for (const auto& p : pairs) train_tsv += join_tokens(p.context) + "\t" + join_tokens(p.label) + "\n";

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + out_dir + ": " + ec.message());
  const std::vector<std::pair<std::string, std::string>> files = {
      {"vocab.txt", vocab_to_text(art.vocab)},
      {"whitelist.txt", counted_to_text(art.whitelist, art.vocab)},
      {"pool.txt", counted_to_text(art.pool, art.vocab)},
      {"trie.txt", trie_to_text(trie)},
      {"train.tsv", train_tsv},
  };
  std::string manifest = "vocab_hash\t" + hex(art.vocab.hash()) + "\n";
  for (const auto& [name, body] : files) {
    write_text_file((fs::path(out_dir) / name).string(), body);
    manifest += name + "\t" + hex(content_hash(body)) + "\n";
  }
  write_text_file((fs::path(out_dir) / "manifest.txt").string(), manifest);
  return art;
}

std::vector<TokenSeq> CorpusDir::whitelist_sequences() const {
  std::vector<TokenSeq> out;
  for (const auto& cs : whitelist) out.push_back(cs.sequence);
  return out;
}

NegativePool CorpusDir::negative_pool(std::size_t max_len) const {
  return build_negative_pool(std::span<const CountedSequence>(pool), pool.size(), max_len);
}

std::vector<Example> CorpusDir::train_examples() const {
  return encode_pairs(read_pairs((fs::path(dir) / "train.tsv").string()), vocab);
}

CorpusDir load_corpus_dir(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "corpus directory " + dir + " does not exist");
  CorpusDir c;
  c.dir = dir;
  c.vocab = vocab_from_text(read_text_file((root / "vocab.txt").string()));
  c.whitelist = counted_from_text(read_text_file((root / "whitelist.txt").string()), c.vocab);
  c.pool = counted_from_text(read_text_file((root / "pool.txt").string()), c.vocab);

  const std::string manifest_path = (root / "manifest.txt").string();
  std::istringstream ms(read_text_file(manifest_path));
  std::string line;
  while (std::getline(ms, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const std::string name = line.substr(0, tab), value = line.substr(tab + 1);
    if (name == "vocab_hash") {
      if (value != hex(c.vocab.hash())) fail(ErrorCode::kFormat, "vocab.txt does not match the manifest");
      continue;
    }
    // trie.txt and train.tsv are exports; only check what is present.
    if (!fs::exists(root / name)) continue;
    const std::string body = read_text_file((root / name).string());
    if (hex(content_hash(body)) != value) {
      fail(ErrorCode::kFormat, name + " in " + dir + " does not match its manifest hash");
    }
  }
  return c;
}

}  // namespace seqmargin
