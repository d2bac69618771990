#include "seqmargin/softmax.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "seqmargin/error.hpp"

namespace seqmargin {

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) return -std::numeric_limits<double>::infinity();
  const auto top = std::max_element(logits.begin(), logits.end());
  const double m = *top;
  if (!std::isfinite(m)) return m;
  // The argmax term contributes exactly 1; log1p keeps the remainder precise.
  double rest = 0.0;
  for (auto it = logits.begin(); it != logits.end(); ++it) {
    if (it != top) rest += std::exp(*it - m);
  }
  return m + std::log1p(rest);
}

double softmax_logprob(std::span<const double> logits, std::size_t index) {
  if (index >= logits.size()) {
    std::ostringstream os;
    os << "softmax_logprob: index " << index << " out of range for " << logits.size()
       << " logits";
    fail(ErrorCode::kArgument, os.str());
  }
  if (logits.size() == 1) return 0.0;
  return std::min(0.0, logits[index] - log_sum_exp(logits));
}

void log_softmax(std::span<const double> logits, std::vector<double>& out) {
  const double z = log_sum_exp(logits);
  out.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::min(0.0, logits[i] - z);
}

void softmax(std::span<const double> logits, std::vector<double>& out) {
  const double z = log_sum_exp(logits);
  out.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - z);
}

}  // namespace seqmargin
