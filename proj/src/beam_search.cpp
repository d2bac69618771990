#include "seqmargin/beam_search.hpp"

#include <algorithm>
#include <cmath>

#include "seqmargin/error.hpp"

namespace seqmargin {

double length_normalized_score(double logprob, std::size_t len, double f) {
  if (f == 0.0) return logprob;
  return logprob / std::pow(static_cast<double>(std::max<std::size_t>(len, 1)), f);
}

namespace {

struct Candidate {
  std::size_t parent;
  TokenId token;
  double logprob;
  std::size_t node;
};

// Lexicographic order of parent.prefix + token without materializing it.
bool prefix_less(const std::vector<BeamHypothesis>& beam, const Candidate& a, const Candidate& b) {
  const auto& pa = beam[a.parent].prefix;
  const auto& pb = beam[b.parent].prefix;
  // All open prefixes share one length, so this is plain lexicographic order.
  if (pa != pb) return pa < pb;
  return a.token < b.token;
}

bool ranked_before(const RankedSequence& a, const RankedSequence& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.sequence < b.sequence;
}

}  // namespace

BeamResult beam_search(const EdModel& model, const Tensor& v_x, const PrefixTrie& trie,
                       std::size_t width, double length_norm_f) {
  if (width == 0) fail(ErrorCode::kArgument, "beam_search: width must be at least 1");
  if (trie.empty()) fail(ErrorCode::kArgument, "beam_search: trie is empty");
  if (!(length_norm_f >= 0.0 && length_norm_f <= 1.0)) {
    fail(ErrorCode::kArgument, "beam_search: length normalization exponent must lie in [0, 1]");
  }
  const auto& dims = model.dims();
  std::vector<BeamHypothesis> beam(1);
  beam[0].state = model.advance(model.initial_state(v_x), dims.bos);

  std::vector<RankedSequence> done;
  std::vector<Candidate> cands;
  std::vector<double> lp;
  for (std::size_t depth = 0; depth < dims.unroll_limit && !beam.empty(); ++depth) {
    cands.clear();
    for (std::size_t b = 0; b < beam.size(); ++b) {
      const auto& kids = trie.node(beam[b].trie_node).children;
      if (kids.empty()) continue;
      model.next_logprobs(beam[b].state, lp);
      for (const auto& [tok, child] : kids) {
        cands.push_back({b, tok, beam[b].cum_logprob + lp[static_cast<std::size_t>(tok)], child});
      }
    }
    // Top (width - completed) expansions over all legal candidates; EOS
    // among them completes, the rest stay open. Width 1 is greedy.
    const std::size_t slots = width - done.size();
    const std::size_t keep = std::min(slots, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [&](const Candidate& a, const Candidate& b) {
                        if (a.logprob != b.logprob) return a.logprob > b.logprob;
                        return prefix_less(beam, a, b);
                      });
    cands.resize(keep);

    std::vector<BeamHypothesis> next;
    next.reserve(keep);
    for (const auto& c : cands) {
      const auto& parent = beam[c.parent];
      if (c.token == dims.eos) {
        RankedSequence r;
        r.sequence.reserve(parent.prefix.size() + 2);
        r.sequence.push_back(dims.bos);
        r.sequence.insert(r.sequence.end(), parent.prefix.begin(), parent.prefix.end());
        r.sequence.push_back(c.token);
        r.logprob = c.logprob;
        r.score = length_normalized_score(c.logprob, r.sequence.size() - 1, length_norm_f);
        done.push_back(std::move(r));
        continue;
      }
      BeamHypothesis h;
      h.prefix = parent.prefix;
      h.prefix.push_back(c.token);
      h.cum_logprob = c.logprob;
      h.trie_node = c.node;
      h.state = model.advance(parent.state, c.token);
      next.push_back(std::move(h));
    }
    beam = std::move(next);
  }
  std::sort(done.begin(), done.end(), ranked_before);
  if (done.size() > width) done.resize(width);
  BeamResult result;
  result.exhausted = done.empty();
  result.ranked = std::move(done);
  return result;
}

}  // namespace seqmargin
