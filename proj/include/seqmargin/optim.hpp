#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqmargin/tensor.hpp"

namespace seqmargin {

class Rng;

// A trainable tensor with its gradient buffer and Adagrad accumulator.
struct Parameter {
  Parameter() = default;
  explicit Parameter(std::vector<std::size_t> shape)
      : value(shape), grad(shape), accum(std::move(shape)) {}

  Tensor value;
  Tensor grad;
  Tensor accum;

  void zero_grad() noexcept { grad.fill(0.0); }
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};

inline constexpr double kAdagradStabilizer = 1e-8;
inline constexpr double kInitRange = 0.08;

// Uniform in [-range, range] from the generator.
void init_uniform(Parameter& p, Rng& rng, double range = kInitRange);

// Scales every gradient by max_norm / g when the global L2 norm g exceeds
// max_norm by more than a relative 1e-10 (rounding slack, which makes the
// operation idempotent). Returns the scale that was applied (1.0 when untouched).
double clip_global_norm(std::span<Parameter* const> params, double max_norm);
double clip_global_norm(std::span<Tensor* const> grads, double max_norm);
double global_grad_norm(std::span<Parameter* const> params);

// accum += g^2; value -= lr * g / (sqrt(accum) + 1e-8); grad = 0.
void adagrad_update(Parameter& p, double lr);

// Learning rate after `step` updates: base * 10^(-step / decade); a decade of
// zero disables decay.
double decayed_learning_rate(double base, double decade, std::uint64_t step);

}  // namespace seqmargin
