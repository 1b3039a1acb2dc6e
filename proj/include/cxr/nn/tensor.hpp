#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace cxr::nn {

// Row-major dense matrix; rows are examples/positions, columns features.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

std::string shape_string(const Tensor& t);

// Throws NonFiniteError naming `what` if any entry is NaN/Inf.
void require_finite(const Tensor& t, const std::string& what);

// A named trainable tensor together with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParameterList = std::vector<Parameter*>;

// What a checkpoint records per tensor.
struct TensorEntry {
  std::string name;
  std::string activation;  // dense layers: "relu"/"identity"/"sigmoid"; otherwise "none"
  const Tensor* value = nullptr;
};

void zero_grads(const ParameterList& params);

// SplitMix64-seeded xoshiro256**. Distributions are implemented here rather
// than via <random> so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1), Box-Muller
  std::size_t below(std::size_t n);       // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Uniform(+-sqrt(6/(fan_in+fan_out))) scaled by `gain`.
Tensor xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng, double gain = 1.0);

}  // namespace cxr::nn
