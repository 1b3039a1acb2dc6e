#include "cxr/nn/grad_check.hpp"

#include <cmath>

#include "cxr/error.hpp"

namespace cxr::nn {

GradCheckResult grad_check(const LossFunction& fn, const ParameterList& params,
                           const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ValidationError("grad_check: eps must be positive");
  zero_grads(params);
  const double base = fn(true);
  if (!std::isfinite(base)) throw NonFiniteError("grad_check: loss is not finite");

  GradCheckResult result;
  for (Parameter* p : params) {
    require_finite(p->grad, "analytic gradient of " + p->name);
    const Eigen::Index n = p->value.size();
    Eigen::Index stride = 1;
    if (options.max_coordinates_per_parameter > 0 &&
        static_cast<std::size_t>(n) > options.max_coordinates_per_parameter) {
      stride = n / static_cast<Eigen::Index>(options.max_coordinates_per_parameter);
    }
    for (Eigen::Index i = 0; i < n; i += stride) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + options.eps;
      const double up = fn(false);
      x = saved - options.eps;
      const double down = fn(false);
      x = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NonFiniteError("grad_check: loss not finite while perturbing " + p->name);
      }
      const double numeric = (up - down) / (2.0 * options.eps);
      const double analytic = p->grad.data()[i];
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(numeric), options.floor);
      ++result.coordinates_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace cxr::nn
