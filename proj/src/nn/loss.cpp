#include "cxr/nn/loss.hpp"

#include <cmath>

#include "cxr/error.hpp"

namespace cxr::nn {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

VectorLoss cross_entropy(std::span<const double> logits, int target) {
  if (logits.empty()) throw DimensionError("cross_entropy: empty logits");
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw ValidationError("cross_entropy: target " + std::to_string(target) + " outside [0, " +
                          std::to_string(logits.size()) + ")");
  }
  const Eigen::Map<const Eigen::VectorXd> z(logits.data(), static_cast<Eigen::Index>(logits.size()));
  const double m = z.maxCoeff();
  Eigen::VectorXd p = (z.array() - m).exp();
  const double sum = p.sum();
  p /= sum;
  const double loss = std::log(sum) + m - z(target);
  p(target) -= 1.0;
  return {loss, std::move(p)};
}

BatchLoss cross_entropy_rows(const Tensor& logits, std::span<const int> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_string(logits));
  }
  if (targets.empty()) throw ValidationError("cross_entropy_rows: empty batch");
  BatchLoss out{0.0, Tensor(logits.rows(), logits.cols())};
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Eigen::VectorXd row = logits.row(r).transpose();
    auto l = cross_entropy(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                           targets[static_cast<std::size_t>(r)]);
    out.loss += l.loss * inv_n;
    out.grad.row(r) = l.grad.transpose() * inv_n;
  }
  return out;
}

ScalarLoss binary_cross_entropy(double logit, int label) {
  if (label != 0 && label != 1) {
    throw ValidationError("binary_cross_entropy: label must be 0 or 1, got " + std::to_string(label));
  }
  const double y = label;
  const double loss = std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
  return {loss, sigmoid(logit) - y};
}

}  // namespace cxr::nn
