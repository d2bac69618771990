#include "seqmargin/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqmargin/error.hpp"
#include "seqmargin/random.hpp"
#include "seqmargin/softmax.hpp"

namespace seqmargin {

namespace {

void log_terms(double s_pos, std::span<const ScoredSample> negatives, std::vector<double>& out) {
  if (negatives.empty()) fail(ErrorCode::kArgument, "estimate_log_partition: need k >= 1 draws");
  const double log_k = std::log(static_cast<double>(negatives.size()));
  out.resize(negatives.size() + 1);
  out[0] = s_pos;
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    if (!(negatives[i].q > 0.0)) {
      fail(ErrorCode::kArgument, "estimate_log_partition: proposal probabilities must be positive");
    }
    out[i + 1] = negatives[i].score - std::log(negatives[i].q) - log_k;
  }
}

}  // namespace

double estimate_log_partition(double s_pos, std::span<const ScoredSample> negatives) {
  std::vector<double> terms;
  log_terms(s_pos, negatives, terms);
  return log_sum_exp(terms);
}

void partition_weights(double s_pos, std::span<const ScoredSample> negatives, double log_z,
                       std::vector<double>& out) {
  log_terms(s_pos, negatives, out);
  for (double& t : out) t = std::exp(t - log_z);
}

TokenProposal::TokenProposal(std::vector<double> unigram) : unigram_(std::move(unigram)) {
  if (unigram_.size() < 2) fail(ErrorCode::kArgument, "token proposal needs at least 2 tokens");
  double total = 0.0;
  for (double p : unigram_) {
    if (!(p > 0.0)) fail(ErrorCode::kArgument, "unigram proposal must be positive on every token");
    total += p;
  }
  for (double& p : unigram_) p /= total;
  cumulative_.resize(unigram_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < unigram_.size(); ++i) {
    cumulative_[i] = acc;
    acc += unigram_[i];
  }
}

std::vector<NegativeSample> TokenProposal::sample(std::size_t n, std::size_t true_token, Rng& rng,
                                                  TokenSampling mode) const {
  const std::size_t m = unigram_.size();
  if (n == 0) fail(ErrorCode::kArgument, "sampled softmax: n_neg must be at least 1");
  if (true_token >= m) fail(ErrorCode::kArgument, "sampled softmax: true token out of range");
  std::vector<NegativeSample> out;
  out.reserve(n);
  if (mode == TokenSampling::kUniformSubset) {
    if (n > m - 1) {
      fail(ErrorCode::kArgument, "sampled softmax: n_neg exceeds vocab - 1 without replacement");
    }
    std::vector<std::size_t> others;
    others.reserve(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
      if (j != true_token) others.push_back(j);
    }
    // partial Fisher-Yates
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.index(others.size() - i);
      std::swap(others[i], others[j]);
      out.push_back({others[i], 1.0 / static_cast<double>(m - 1)});
    }
    return out;
  }
  const double gap_start = cumulative_[true_token];
  const double gap = unigram_[true_token];
  const double mass = 1.0 - gap;
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform() * mass;
    if (u >= gap_start) u += gap;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t j = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    if (j == true_token) j = (j + 1 < m) ? j + 1 : j - 1;
    out.push_back({j, unigram_[j] / mass});
  }
  return out;
}

SampledSoftmaxLoss sampled_token_softmax_loss(std::span<const double> logits,
                                              std::size_t true_token,
                                              std::span<const NegativeSample> draws,
                                              std::span<double> d_logits) {
  if (true_token >= logits.size()) {
    fail(ErrorCode::kArgument, "sampled softmax: true token out of range");
  }
  std::vector<ScoredSample> scored;
  scored.reserve(draws.size());
  for (const auto& d : draws) scored.push_back({logits[d.index], d.q});
  const double log_z = estimate_log_partition(logits[true_token], scored);
  if (!d_logits.empty()) {
    std::vector<double> w;
    partition_weights(logits[true_token], scored, log_z, w);
    d_logits[true_token] += w[0] - 1.0;
    for (std::size_t i = 0; i < draws.size(); ++i) d_logits[draws[i].index] += w[i + 1];
  }
  return {log_z - logits[true_token], log_z};
}

}  // namespace seqmargin
