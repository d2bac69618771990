#include "seqmargin/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqmargin/error.hpp"
#include "seqmargin/random.hpp"

namespace seqmargin::synth {

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::size_t word_count(const std::string& s) {
  std::istringstream is(s);
  std::string w;
  std::size_t n = 0;
  while (is >> w) ++n;
  return n;
}

const std::vector<std::vector<std::string>>& short_replies() {
  // Ordered so that each of the lengths 1..3 has a frequent member.
  static const std::vector<std::vector<std::string>> r = {
      {"ok"},    {"sure", "thing"}, {"hmm", "maybe", "later"}, {"yes"},   {"not", "really"},
      {"who", "knows", "why"},      {"no"},                    {"got", "it"}, {"thanks"}};
  return r;
}

Grammar base_grammar() {
  Grammar g;
  g.openers = {"what about", "tell me about", "any thoughts on"};
  g.closers = {"", "today", "lately"};
  g.fixed_words = {"really", "like", "the", "and", "to", "so", "very", "just", "that", "was"};
  g.slot_words = {"good", "bad", "new", "old", "big", "small", "fun", "hard", "cool", "weird", "great", "odd"};
  return g;
}

Grammar make_planted() {
  Grammar g = base_grammar();
  g.name = "planted-short-distractor";
  g.topics = {"music", "food", "travel", "work", "sports", "movies", "books", "games"};
  g.topic_length = {4, 5, 6, 7, 8, 9, 10, 12};
  // One clear favourite; a wider beam that finds it keeps it.
  const double w[] = {0.36, 0.1, 0.09, 0.08, 0.08, 0.08, 0.07, 0.07, 0.07};
  for (std::size_t r = 0; r < short_replies().size(); ++r) g.shorts.push_back({short_replies()[r], w[r]});
  g.p_short = 0.45;
  g.slot_options = 3;
  return g;
}

Grammar make_multi() {
  Grammar g = base_grammar();
  g.name = "multi-response";
  g.topics = {"music", "food",  "travel",  "work",   "sports", "movies",
              "books", "games", "weather", "school", "family", "money"};
  g.topic_length = {3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
  for (const auto& r : short_replies()) {
    g.shorts.push_back({r, 1.0 / static_cast<double>(short_replies().size())});
  }
  g.p_short = 0.2;
  g.slot_options = 2;
  return g;
}

}  // namespace

std::size_t Grammar::slot_count(std::size_t topic) const {
  return (topic_length.at(topic) - 1) / 2;
}

std::vector<std::string> Grammar::slot_candidates(std::size_t topic, std::size_t pos) const {
  std::vector<std::string> out;
  const std::size_t start = (topic * 5 + pos * 3) % slot_words.size();
  for (std::size_t i = 0; i < slot_options; ++i) {
    out.push_back(slot_words[(start + i) % slot_words.size()]);
  }
  return out;
}

std::vector<std::string> Grammar::long_reply(std::size_t topic,
                                             const std::vector<std::size_t>& choices) const {
  const std::size_t len = topic_length.at(topic);
  if (choices.size() != slot_count(topic)) fail(ErrorCode::kArgument, "wrong number of slot choices");
  std::vector<std::string> out{"i"};
  std::size_t slot = 0;
  for (std::size_t pos = 1; pos < len; ++pos) {
    if (pos % 2 == 0) {
      out.push_back(slot_candidates(topic, pos).at(choices[slot++]));
    } else {
      out.push_back(fixed_words[(topic * 7 + pos * 3) % fixed_words.size()]);
    }
  }
  return out;
}

std::string ContextSpec::text(const Grammar& g) const {
  std::string c = g.openers.at(opener) + " " + g.topics.at(topic);
  for (std::size_t j = 0; j < hints.size(); ++j) {
    c += " " + g.slot_candidates(topic, 2 * (j + 1)).at(hints[j]);
  }
  if (!g.closers.at(closer).empty()) c += " " + g.closers[closer];
  return c;
}

const Grammar& planted_short_distractor() {
  static const Grammar g = make_planted();
  return g;
}

const Grammar& multi_response() {
  static const Grammar g = make_multi();
  return g;
}

const Grammar& grammar_by_name(const std::string& profile) {
  if (profile == planted_short_distractor().name) return planted_short_distractor();
  if (profile == multi_response().name) return multi_response();
  fail(ErrorCode::kUsage, "unknown synthetic profile '" + profile +
                              "' (expected planted-short-distractor or multi-response)");
}

std::vector<std::string> profile_names() {
  return {planted_short_distractor().name, multi_response().name};
}

std::vector<Pair> generate(const Grammar& g, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> cum;
  double acc = 0.0;
  for (const auto& s : g.shorts) cum.push_back(acc += s.weight);
  std::vector<Pair> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    ContextSpec ctx;
    ctx.opener = rng.index(g.openers.size());
    ctx.topic = rng.index(g.topics.size());
    if (g.context_slots) {
      ctx.hints.resize(g.slot_count(ctx.topic));
      for (auto& h : ctx.hints) h = rng.index(g.slot_options);
    }
    ctx.closer = rng.index(g.closers.size());
    Pair p;
    p.context = ctx.text(g);
    if (rng.bernoulli(g.p_short)) {
      const double u = rng.uniform() * acc;
      const std::size_t r = std::min<std::size_t>(
          static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()),
          g.shorts.size() - 1);
      p.label = join(g.shorts[r].words);
    } else if (g.context_slots) {
      p.label = join(g.long_reply(ctx.topic, ctx.hints));
    } else {
      std::vector<std::size_t> choices(g.slot_count(ctx.topic));
      for (auto& c : choices) c = rng.index(g.slot_options);
      p.label = join(g.long_reply(ctx.topic, choices));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::map<std::string, double> label_distribution(const Grammar& g, const ContextSpec& ctx) {
  std::map<std::string, double> dist;
  for (const auto& s : g.shorts) dist[join(s.words)] += g.p_short * s.weight;
  if (g.context_slots) {
    dist[join(g.long_reply(ctx.topic, ctx.hints))] += 1.0 - g.p_short;
    return dist;
  }
  const std::size_t k = g.slot_count(ctx.topic);
  std::size_t combos = 1;
  for (std::size_t i = 0; i < k; ++i) combos *= g.slot_options;
  const double each = (1.0 - g.p_short) / static_cast<double>(combos);
  std::vector<std::size_t> choices(k, 0);
  for (std::size_t n = 0; n < combos; ++n) {
    std::size_t rem = n;
    for (std::size_t i = 0; i < k; ++i) {
      choices[i] = rem % g.slot_options;
      rem /= g.slot_options;
    }
    dist[join(g.long_reply(ctx.topic, choices))] += each;
  }
  return dist;
}

namespace {

// Every context of a topic has the same distribution up to relabeling of the
// slot words, so one representative per topic suffices for length statistics.
ContextSpec representative(const Grammar& g, std::size_t topic) {
  ContextSpec c;
  c.topic = topic;
  if (g.context_slots) c.hints.assign(g.slot_count(topic), 0);
  return c;
}

}  // namespace

std::vector<double> declared_length_distribution(const Grammar& g) {
  std::vector<double> p;
  const double pt = 1.0 / static_cast<double>(g.topics.size());
  for (std::size_t t = 0; t < g.topics.size(); ++t) {
    for (const auto& [label, prob] : label_distribution(g, representative(g, t))) {
      const std::size_t n = word_count(label);
      if (p.size() <= n) p.resize(n + 1, 0.0);
      p[n] += pt * prob;
    }
  }
  return p;
}

std::vector<double> response_entropy_by_length(const Grammar& g) {
  const std::vector<double> plen = declared_length_distribution(g);
  std::vector<double> h(plen.size(), 0.0);
  const double pt = 1.0 / static_cast<double>(g.topics.size());
  for (std::size_t t = 0; t < g.topics.size(); ++t) {
    const auto dist = label_distribution(g, representative(g, t));
    std::vector<double> mass(plen.size(), 0.0);
    for (const auto& [label, prob] : dist) mass[word_count(label)] += prob;
    std::vector<double> ht(plen.size(), 0.0);
    for (const auto& [label, prob] : dist) {
      const std::size_t n = word_count(label);
      const double q = prob / mass[n];
      ht[n] -= q * std::log2(q);
    }
    for (std::size_t n = 0; n < plen.size(); ++n) {
      if (plen[n] > 0) h[n] += pt * mass[n] / plen[n] * ht[n];
    }
  }
  return h;
}

std::optional<ContextSpec> parse_context(const Grammar& g, const std::string& context) {
  std::vector<std::string> words;
  {
    std::istringstream is(context);
    std::string w;
    while (is >> w) words.push_back(w);
  }
  for (std::size_t o = 0; o < g.openers.size(); ++o) {
    std::vector<std::string> ow;
    {
      std::istringstream is(g.openers[o]);
      std::string w;
      while (is >> w) ow.push_back(w);
    }
    if (words.size() <= ow.size() || !std::equal(ow.begin(), ow.end(), words.begin())) continue;
    std::size_t i = ow.size();
    const auto tit = std::find(g.topics.begin(), g.topics.end(), words[i]);
    if (tit == g.topics.end()) continue;
    ContextSpec spec;
    spec.opener = o;
    spec.topic = static_cast<std::size_t>(tit - g.topics.begin());
    ++i;
    bool ok = true;
    if (g.context_slots) {
      for (std::size_t j = 0; j < g.slot_count(spec.topic) && ok; ++j, ++i) {
        const auto cands = g.slot_candidates(spec.topic, 2 * (j + 1));
        const auto it = i < words.size() ? std::find(cands.begin(), cands.end(), words[i]) : cands.end();
        if (it == cands.end()) ok = false;
        else spec.hints.push_back(static_cast<std::size_t>(it - cands.begin()));
      }
    }
    if (!ok) continue;
    for (std::size_t c = 0; c < g.closers.size(); ++c) {
      const bool empty = g.closers[c].empty();
      if ((empty && i == words.size()) || (!empty && i + 1 == words.size() && words[i] == g.closers[c])) {
        spec.closer = c;
        if (spec.text(g) == context) return spec;
      }
    }
  }
  return std::nullopt;
}

bool derivable(const Grammar& g, const std::string& context, const std::string& label) {
  const auto spec = parse_context(g, context);
  if (!spec) return false;
  return label_distribution(g, *spec).count(label) != 0;
}

std::string to_tsv(const std::vector<Pair>& pairs) {
  std::string out;
  for (const auto& p : pairs) out += p.context + "\t" + p.label + "\n";
  return out;
}

}  // namespace seqmargin::synth
