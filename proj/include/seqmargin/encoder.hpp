#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seqmargin/corpus.hpp"
#include "seqmargin/lstm.hpp"

namespace seqmargin {

inline constexpr std::size_t kDefaultUnrollLimit = 100;

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t embed = 0;
  std::size_t hidden = 0;
  std::size_t depth = 1;
  std::size_t unroll_limit = kDefaultUnrollLimit;
  TokenId bos = Vocab::kBos;
  TokenId eos = Vocab::kEos;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Token embedding followed by an LSTM stack; the encoding is the top hidden
// state after the last token.
class SequenceEncoder {
 public:
  struct Trace {
    std::vector<TokenId> tokens;
    std::vector<LstmStack::StepCache> steps;
  };

  SequenceEncoder() = default;
  SequenceEncoder(std::size_t vocab, std::size_t embed, std::size_t hidden, std::size_t depth);

  Tensor encode(std::span<const TokenId> tokens) const;
  Tensor encode(std::span<const TokenId> tokens, Trace& trace) const;
  // Backpropagates d(loss)/d(encoding) through the recorded run.
  void backward(const Trace& trace, std::span<const double> d_encoding);

  void init(Rng& rng, double range = kInitRange);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);

  Parameter& embedding() noexcept { return embedding_; }
  const Parameter& embedding() const noexcept { return embedding_; }
  LstmStack& stack() noexcept { return stack_; }
  const LstmStack& stack() const noexcept { return stack_; }
  std::size_t hidden_dim() const noexcept { return stack_.hidden_dim(); }

 private:
  std::span<const double> embed(TokenId t) const;

  Parameter embedding_;
  LstmStack stack_;
};

// Keeps the most recent `limit` tokens.
std::span<const TokenId> truncate_context(std::span<const TokenId> context, std::size_t limit);
void check_label_length(std::span<const TokenId> label, std::size_t limit);

std::vector<Parameter*> parameter_pointers(const std::vector<NamedParameter>& named);
std::uint64_t fingerprint(const std::vector<NamedParameter>& named);

}  // namespace seqmargin
