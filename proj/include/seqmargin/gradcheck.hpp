#pragma once

#include <functional>
#include <span>

#include "seqmargin/optim.hpp"

namespace seqmargin {

// Evaluates the loss. When `with_grad` is set the callee must also add the
// analytic gradient into each Parameter::grad.
using LossFunction = std::function<double(bool with_grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central differences against the analytic gradient, coordinate by
// coordinate. Relative error is |analytic - numeric| / max(floor, |analytic|,
// |numeric|). Below the floor the central difference is dominated by
// rounding in the loss (about 1e-16 * |loss| / eps), so tiny coordinates are
// compared in absolute terms instead.
inline constexpr double kGradCheckFloor = 1e-6;
// kCentral: (f(+h) - f(-h)) / 2h, error O(h^2).
// kFivePoint: (f(-2h) - 8 f(-h) + 8 f(+h) - f(+2h)) / 12h, error O(h^4); used
// where the tolerance is near rounding level.
enum class Stencil { kCentral, kFivePoint };
GradCheckResult finite_diff_check(const LossFunction& loss, std::span<Parameter* const> params,
                                  double eps = 1e-5, double floor = kGradCheckFloor,
                                  Stencil stencil = Stencil::kCentral);

}  // namespace seqmargin
