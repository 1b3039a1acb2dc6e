#include "cxr/nn/optimizer.hpp"

#include <cmath>

#include "cxr/error.hpp"

namespace cxr::nn {

void adamw_update(Tensor& param, const Tensor& grad, Moments& m, const AdamWConfig& c, std::int64_t step) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() || m.first.rows() != param.rows() ||
      m.first.cols() != param.cols()) {
    throw DimensionError("adamw: parameter " + shape_string(param) + ", gradient " + shape_string(grad) +
                         ", moments " + shape_string(m.first) + " disagree");
  }
  m.first = c.beta1 * m.first + (1.0 - c.beta1) * grad;
  m.second = c.beta2 * m.second + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  param *= (1.0 - c.learning_rate * c.weight_decay);
  param.array() -= c.learning_rate * (m.first.array() / bc1) / ((m.second.array() / bc2).sqrt() + c.epsilon);
}

void AdamW::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  config_.learning_rate = lr;
}

void AdamW::step(const ParameterList& params) {
  if (moments_.empty()) {
    moments_.reserve(params.size());
    for (const Parameter* p : params) {
      moments_.push_back({Tensor::Zero(p->value.rows(), p->value.cols()),
                          Tensor::Zero(p->value.rows(), p->value.cols())});
    }
  }
  if (moments_.size() != params.size()) {
    throw DimensionError("adamw: bound to " + std::to_string(moments_.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  ++steps_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adamw_update(params[i]->value, params[i]->grad, moments_[i], config_, steps_);
  }
}

}  // namespace cxr::nn
