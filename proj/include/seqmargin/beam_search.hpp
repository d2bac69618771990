#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqmargin/corpus.hpp"
#include "seqmargin/ed_model.hpp"

namespace seqmargin {

struct BeamHypothesis {
  TokenSeq prefix;  // label tokens after BOS
  double cum_logprob = 0.0;
  EdModel::State state;  // decoder state after consuming BOS + prefix
  std::size_t trie_node = PrefixTrie::kRoot;
};

struct RankedSequence {
  TokenSeq sequence;  // BOS-prefixed, EOS-terminated
  double score = 0.0;  // ranking key
  double logprob = 0.0;
};

struct BeamResult {
  std::vector<RankedSequence> ranked;
  bool exhausted = false;  // no hypothesis completed within the unroll limit
};

// Ranking key for a completed hypothesis: logprob / len^f with len counting
// the tokens after BOS (EOS included).
double length_normalized_score(double logprob, std::size_t len, double f);

// Trie-constrained beam search. Each step keeps the best (width - completed)
// legal expansions; an EOS among them completes and leaves the beam. Returns up to `width` completions sorted by
// score descending with ties broken on token ids.
BeamResult beam_search(const EdModel& model, const Tensor& v_x, const PrefixTrie& trie,
                       std::size_t width, double length_norm_f = 0.0);

}  // namespace seqmargin
