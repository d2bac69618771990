#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqmargin/corpus.hpp"
#include "seqmargin/encoder.hpp"
#include "seqmargin/importance.hpp"

namespace seqmargin {

// Locally normalized encoder-decoder. The context encoder produces v_x, the
// decoder starts from s_0 = v_x in every layer and predicts each label token
// with a softmax over the vocabulary given the true prefix.
class EdModel {
 public:
  using State = LstmStack::State;

  EdModel() = default;
  explicit EdModel(const ModelDims& dims);

  void init(std::uint64_t seed, double range = kInitRange);
  const ModelDims& dims() const noexcept { return dims_; }

  Tensor encode_context(std::span<const TokenId> context) const;
  double sequence_logprob(const Tensor& v_x, std::span<const TokenId> label) const;
  // log Pr(label[t] | label[0..t), x) for t = 1 .. size-1.
  std::vector<double> token_logprobs(const Tensor& v_x, std::span<const TokenId> label) const;

  State initial_state(const Tensor& v_x) const;
  State advance(const State& state, TokenId input) const;
  void logits(const State& state, std::vector<double>& out) const;
  void next_logprobs(const State& state, std::vector<double>& out) const;

  // Adds grad_scale * d(-log Pr(label | context))/d(theta) into the gradient
  // buffers and returns -log Pr(label | context). With `proposal` set, each
  // position uses the sampled token softmax with `n_neg` draws instead.
  double accumulate_nll(const Example& ex, double grad_scale,
                        const TokenProposal* proposal = nullptr, std::size_t n_neg = 0,
                        Rng* rng = nullptr);

  std::vector<NamedParameter> named_parameters();
  std::vector<Parameter*> parameters();
  std::uint64_t fingerprint();

  SequenceEncoder& context_encoder() noexcept { return context_; }
  const SequenceEncoder& context_encoder() const noexcept { return context_; }
  SequenceEncoder& decoder() noexcept { return decoder_; }
  Parameter& softmax_weights() noexcept { return softmax_; }

 private:
  void check_token(TokenId t) const;

  ModelDims dims_;
  SequenceEncoder context_;
  SequenceEncoder decoder_;  // embedding plays theta_E, stack plays theta_R
  Parameter softmax_;        // vocab x hidden, theta_S
};

struct TrainOptions {
  double lr = 0.1;
  double clip_norm = 1.0;
  std::size_t sampled_negatives = 0;  // 0: full softmax (ED) / unused (EE)
  std::size_t negatives = 16;         // EE draws per example
};

struct StepStats {
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double clip_scale = 1.0;
  std::size_t skipped = 0;
};

// Mean NLL over the batch, backprop, global-norm clipping and one Adagrad
// update. The returned loss is the pre-update value.
StepStats train_step_ed(EdModel& model, std::span<const Example> batch, const TrainOptions& opts,
                        const TokenProposal* proposal = nullptr, Rng* rng = nullptr);

}  // namespace seqmargin
