#pragma once

#include <span>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

struct VectorLoss {
  double loss;
  Eigen::VectorXd grad;  // d loss / d logits
};

struct BatchLoss {
  double loss;  // mean over rows
  Tensor grad;  // d mean-loss / d logits
};

struct ScalarLoss {
  double loss;
  double grad;  // d loss / d logit
};

double sigmoid(double z);

// -log softmax(logits)[target]; gradient softmax - onehot(target).
VectorLoss cross_entropy(std::span<const double> logits, int target);

// Mean cross-entropy over rows of `logits`, one target per row.
BatchLoss cross_entropy_rows(const Tensor& logits, std::span<const int> targets);

// max(z,0) - z*y + log1p(exp(-|z|)); gradient sigmoid(z) - y. Label must be 0 or 1.
ScalarLoss binary_cross_entropy(double logit, int label);

}  // namespace cxr::nn
