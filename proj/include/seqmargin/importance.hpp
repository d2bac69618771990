#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqmargin/corpus.hpp"

namespace seqmargin {

class Rng;

struct ScoredSample {
  double score = 0.0;
  double q = 0.0;  // proposal probability of the drawn item
};

// log of Z_hat = exp(s_pos) + (1/k) * sum_i exp(s_i) / q_i, evaluated as a
// log-sum-exp over {s_pos, s_i - log q_i - log k}. Needs k >= 1 draws.
double estimate_log_partition(double s_pos, std::span<const ScoredSample> negatives);

// Per-term weights d(log Z_hat)/d(score): out[0] for the positive, out[1 + i]
// for draw i. They sum to one.
void partition_weights(double s_pos, std::span<const ScoredSample> negatives,
                       double log_z, std::vector<double>& out);

enum class TokenSampling { kWithReplacement, kUniformSubset };

// Proposal over output tokens built from a unigram distribution. Sampling
// always excludes the true token and renormalizes what remains.
class TokenProposal {
 public:
  explicit TokenProposal(std::vector<double> unigram);
  std::size_t size() const noexcept { return unigram_.size(); }
  std::span<const double> unigram() const noexcept { return unigram_; }

  // kWithReplacement: i.i.d. draws with q = unigram / (1 - unigram[true]).
  // kUniformSubset: n distinct tokens uniformly, q = 1 / (m - 1); requires
  // n <= m - 1.
  std::vector<NegativeSample> sample(std::size_t n, std::size_t true_token, Rng& rng,
                                     TokenSampling mode = TokenSampling::kWithReplacement) const;

 private:
  std::vector<double> unigram_;
  std::vector<double> cumulative_;
};

struct SampledSoftmaxLoss {
  double loss = 0.0;             // log Z_hat - logit_true
  double log_denominator = 0.0;  // log Z_hat
};

// Sampled estimate of -log softmax(logits)[true_token]. When `d_logits` is
// given the gradient of the estimate w.r.t. the logits is added into it.
SampledSoftmaxLoss sampled_token_softmax_loss(std::span<const double> logits,
                                              std::size_t true_token,
                                              std::span<const NegativeSample> draws,
                                              std::span<double> d_logits = {});

}  // namespace seqmargin
