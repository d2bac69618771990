#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace seqmargin {

// log of the max-shifted normalizer, i.e. log sum_j exp(logits[j]).
double log_sum_exp(std::span<const double> logits);

// log softmax(logits)[index]; throws an argument error for a bad index.
double softmax_logprob(std::span<const double> logits, std::size_t index);

// Full log-softmax written into `out` (resized to logits.size()).
void log_softmax(std::span<const double> logits, std::vector<double>& out);
void softmax(std::span<const double> logits, std::vector<double>& out);

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace seqmargin
