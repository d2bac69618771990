#include "seqmargin/encoder.hpp"

#include <sstream>

#include "seqmargin/error.hpp"
#include "seqmargin/hash.hpp"

namespace seqmargin {

void ModelDims::validate() const {
  if (vocab == 0 || embed == 0 || hidden == 0 || depth == 0 || unroll_limit == 0) {
    fail(ErrorCode::kArgument, "model dimensions must all be positive");
  }
  const auto in_vocab = [&](TokenId t) { return t >= 0 && static_cast<std::size_t>(t) < vocab; };
  if (!in_vocab(bos) || !in_vocab(eos)) {
    fail(ErrorCode::kArgument, "BOS/EOS ids must lie inside the vocabulary");
  }
}

SequenceEncoder::SequenceEncoder(std::size_t vocab, std::size_t embed, std::size_t hidden,
                                 std::size_t depth)
    : embedding_({vocab, embed}), stack_(embed, hidden, depth) {}

std::span<const double> SequenceEncoder::embed(TokenId t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= embedding_.value.rows()) {
    std::ostringstream os;
    os << "token id " << t << " out of range for vocabulary of " << embedding_.value.rows();
    fail(ErrorCode::kArgument, os.str());
  }
  return embedding_.value.row(static_cast<std::size_t>(t));
}

Tensor SequenceEncoder::encode(std::span<const TokenId> tokens) const {
  auto state = stack_.zero_state();
  for (TokenId t : tokens) state = stack_.step(embed(t), state);
  return state.back().h;
}

Tensor SequenceEncoder::encode(std::span<const TokenId> tokens, Trace& trace) const {
  trace.tokens.assign(tokens.begin(), tokens.end());
  trace.steps.assign(tokens.size(), {});
  auto state = stack_.zero_state();
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    state = stack_.step(embed(tokens[t]), state, trace.steps[t]);
  }
  return state.back().h;
}

void SequenceEncoder::backward(const Trace& trace, std::span<const double> d_encoding) {
  const std::size_t d = stack_.hidden_dim();
  const std::size_t depth = stack_.depth();
  std::vector<std::vector<double>> dh(depth, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> dc(depth, std::vector<double>(d, 0.0));
  for (std::size_t k = 0; k < d; ++k) dh.back()[k] = d_encoding[k];
  std::vector<double> dx(embedding_.value.cols());
  for (std::size_t t = trace.steps.size(); t-- > 0;) {
    std::fill(dx.begin(), dx.end(), 0.0);
    stack_.step_backward(trace.steps[t], dh, dc, dx);
    auto row = embedding_.grad.row(static_cast<std::size_t>(trace.tokens[t]));
    for (std::size_t k = 0; k < dx.size(); ++k) row[k] += dx[k];
  }
}

void SequenceEncoder::init(Rng& rng, double range) {
  init_uniform(embedding_, rng, range);
  stack_.init(rng, range);
}

void SequenceEncoder::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + ".embedding", &embedding_});
  stack_.collect(out, prefix + ".lstm");
}

std::span<const TokenId> truncate_context(std::span<const TokenId> context, std::size_t limit) {
  if (context.size() <= limit) return context;
  return context.subspan(context.size() - limit);
}

void check_label_length(std::span<const TokenId> label, std::size_t limit) {
  if (label.size() > limit + 1) {
    std::ostringstream os;
    os << "label of " << label.size() - 1 << " tokens exceeds the unroll limit " << limit;
    fail(ErrorCode::kArgument, os.str());
  }
}

std::vector<Parameter*> parameter_pointers(const std::vector<NamedParameter>& named) {
  std::vector<Parameter*> out;
  out.reserve(named.size());
  for (const auto& np : named) out.push_back(np.param);
  return out;
}

std::uint64_t fingerprint(const std::vector<NamedParameter>& named) {
  Fnv1a h;
  for (const auto& np : named) {
    h.str(np.name);
    for (auto dim : np.param->value.shape()) h.u64(dim);
    h.f64s(np.param->value.span());
  }
  return h.digest();
}

}  // namespace seqmargin
