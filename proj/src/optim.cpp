#include "seqmargin/optim.hpp"

#include <cmath>

#include "seqmargin/error.hpp"
#include "seqmargin/random.hpp"

namespace seqmargin {

void init_uniform(Parameter& p, Rng& rng, double range) {
  for (double& v : p.value.span()) v = rng.uniform(-range, range);
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.span()) sq += g * g;
  }
  return std::sqrt(sq);
}

namespace {

double clip_tensors(std::span<Tensor* const> grads, double max_norm) {
  if (!(max_norm > 0.0)) fail(ErrorCode::kArgument, "clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const Tensor* g : grads) {
    for (double v : g->span()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  // Slack for rounding in the norm, so re-clipping a clipped set is a no-op.
  if (norm <= max_norm * (1.0 + 1e-10)) return 1.0;
  const double scale = max_norm / norm;
  for (Tensor* g : grads) {
    for (double& v : g->span()) v *= scale;
  }
  return scale;
}

}  // namespace

double clip_global_norm(std::span<Tensor* const> grads, double max_norm) {
  return clip_tensors(grads, max_norm);
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  std::vector<Tensor*> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) grads.push_back(&p->grad);
  return clip_tensors(grads, max_norm);
}

void adagrad_update(Parameter& p, double lr) {
  if (!(lr > 0.0)) fail(ErrorCode::kArgument, "adagrad_update: learning rate must be positive");
  auto value = p.value.span();
  auto grad = p.grad.span();
  auto accum = p.accum.span();
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    if (g == 0.0) continue;
    accum[i] += g * g;
    value[i] -= lr * g / (std::sqrt(accum[i]) + kAdagradStabilizer);
    grad[i] = 0.0;
  }
}

double decayed_learning_rate(double base, double decade, std::uint64_t step) {
  if (decade <= 0.0) return base;
  return base * std::pow(10.0, -static_cast<double>(step) / decade);
}

}  // namespace seqmargin
