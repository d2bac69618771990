#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace seqmargin::synth {

// Grammar shared by both profiles:
//   context := opener topic [hint...] [closer]
//   label   := short                 with probability p_short
//            | "i" body(topic)       otherwise
// A short reply is drawn from a fixed weighted list and ignores the context.
// The long body for topic t has topic_length[t] words. Even positions after
// "i" are slots drawn from slot_options candidate words, odd positions are
// fixed words. With context_slots the context carries one hint per slot,
// drawn uniformly from that slot's candidates, and the long reply copies the
// hints, so the reply is fully determined by the context. Without it there
// are no hints and each slot is uniform, giving (L-1)/2 * log2(options) bits
// for a long reply of length L. Openers and closers carry no information.
struct ShortReply {
  std::vector<std::string> words;
  double weight = 0.0;
};

struct Grammar {
  std::string name;
  std::vector<std::string> openers;
  std::vector<std::string> closers;  // "" means no closer
  std::vector<std::string> topics;
  std::vector<std::size_t> topic_length;
  std::vector<ShortReply> shorts;  // weights sum to 1
  double p_short = 0.0;
  std::size_t slot_options = 2;
  bool context_slots = false;
  std::vector<std::string> fixed_words;
  std::vector<std::string> slot_words;

  std::size_t slot_count(std::size_t topic) const;
  // Words of the long reply for `topic` with slot choices `choices`.
  std::vector<std::string> long_reply(std::size_t topic, const std::vector<std::size_t>& choices) const;
  // Candidate words at slot position `pos` (1-based position in the reply).
  std::vector<std::string> slot_candidates(std::size_t topic, std::size_t pos) const;
};

struct ContextSpec {
  std::size_t opener = 0;
  std::size_t topic = 0;
  std::size_t closer = 0;
  std::vector<std::size_t> hints;  // slot choices named by the context
  std::string text(const Grammar& g) const;
};

const Grammar& planted_short_distractor();
const Grammar& multi_response();
// "planted-short-distractor" or "multi-response"; usage error otherwise.
const Grammar& grammar_by_name(const std::string& profile);
std::vector<std::string> profile_names();

struct Pair {
  std::string context;
  std::string label;
};

// Deterministic in (grammar, size, seed).
std::vector<Pair> generate(const Grammar& g, std::size_t size, std::uint64_t seed);

// Full label distribution given the context (labels as space-joined words).
std::map<std::string, double> label_distribution(const Grammar& g, const ContextSpec& ctx);
// P(word count = n) for n = 0 .. max length, topics uniform.
std::vector<double> declared_length_distribution(const Grammar& g);
// H(label | context, word count = n) in bits, averaged over contexts weighted
// by P(context | n). Zero for lengths that never occur.
std::vector<double> response_entropy_by_length(const Grammar& g);

// Inverse of ContextSpec::text; nullopt when the grammar cannot produce it.
std::optional<ContextSpec> parse_context(const Grammar& g, const std::string& context);
bool derivable(const Grammar& g, const std::string& context, const std::string& label);

// TSV lines "context<TAB>label".
std::string to_tsv(const std::vector<Pair>& pairs);

}  // namespace seqmargin::synth
