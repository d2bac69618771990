#include "seqmargin/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "seqmargin/error.hpp"

namespace seqmargin {

namespace {

double checked(double v) {
  if (!std::isfinite(v)) fail(ErrorCode::kEvaluation, "finite_diff_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const LossFunction& loss, std::span<Parameter* const> params,
                                  double eps, double floor, Stencil stencil) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    fail(ErrorCode::kArgument, "finite_diff_check: eps must lie in [1e-7, 1e-3]");
  }
  if (!(floor > 0)) fail(ErrorCode::kArgument, "finite_diff_check: floor must be positive");
  for (Parameter* p : params) p->zero_grad();
  checked(loss(true));
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto value = params[pi]->value.span();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double saved = value[k];
      const auto at = [&](double offset) {
        value[k] = saved + offset;
        const double v = checked(loss(false));
        value[k] = saved;
        return v;
      };
      double numeric = 0.0;
      if (stencil == Stencil::kCentral) {
        numeric = (at(eps) - at(-eps)) / (2.0 * eps);
      } else {
        numeric = (at(-2 * eps) - 8 * at(-eps) + 8 * at(eps) - at(2 * eps)) / (12.0 * eps);
      }
      const double a = analytic[pi][k];
      const double err = std::abs(a - numeric) / std::max({floor, std::abs(a), std::abs(numeric)});
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = pi;
        result.worst_index = k;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return result;
}

}  // namespace seqmargin
