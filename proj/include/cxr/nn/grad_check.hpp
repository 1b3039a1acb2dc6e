#pragma once

#include <functional>
#include <string>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

// Evaluates the scalar loss. When the flag is set it must also accumulate
// analytic gradients into the parameters' `grad` (they are zeroed first).
using LossFunction = std::function<double(bool accumulate_gradients)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  std::size_t coordinates_checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Relative error is |analytic - numeric| / max(|numeric|, floor).
  double floor = 1e-6;
  // Coordinates per parameter, evenly strided; 0 checks all of them.
  std::size_t max_coordinates_per_parameter = 0;
};

// Central finite-difference check of analytic gradients.
GradCheckResult grad_check(const LossFunction& fn, const ParameterList& params,
                           const GradCheckOptions& options = {});

}  // namespace cxr::nn
