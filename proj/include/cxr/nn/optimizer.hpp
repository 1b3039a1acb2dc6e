#pragma once

#include <cstdint>
#include <vector>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct Moments {
  Tensor first;
  Tensor second;
};

// Adam with decoupled weight decay. Moment buffers are bound to the parameter
// list on the first step; later steps must pass a list of the same shapes.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(const ParameterList& params);

  double learning_rate() const { return config_.learning_rate; }
  void set_learning_rate(double lr);
  std::int64_t steps() const { return steps_; }
  const AdamWConfig& config() const { return config_; }
  const std::vector<Moments>& moments() const { return moments_; }

 private:
  AdamWConfig config_;
  std::vector<Moments> moments_;
  std::int64_t steps_ = 0;
};

// One AdamW update of a single tensor; `step` is the 1-based step count.
void adamw_update(Tensor& param, const Tensor& grad, Moments& moments, const AdamWConfig& config,
                  std::int64_t step);

}  // namespace cxr::nn
