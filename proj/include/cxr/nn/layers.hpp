#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

enum class Activation { identity, relu, sigmoid };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

// Row-wise max-subtracted softmax.
Tensor softmax_rows(const Tensor& x);

// y = act(x W + b). `forward`/`backward` cache activations for one batch;
// `apply` is the const path used for inference and may run concurrently.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, Eigen::Index d_in, Eigen::Index d_out, Activation act, Rng& rng,
        double init_gain = 1.0);
  Dense(std::string name, Tensor weight, RowVector bias, Activation act);

  Tensor apply(const Tensor& x) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  void collect(ParameterList& out);
  void describe(std::vector<TensorEntry>& out) const;

  Eigen::Index in_dim() const { return weight_.value.rows(); }
  Eigen::Index out_dim() const { return weight_.value.cols(); }
  Activation activation() const { return act_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

 private:
  void check_input(const Tensor& x) const;

  Parameter weight_;
  Parameter bias_;  // 1 x d_out
  Activation act_ = Activation::identity;
  Tensor x_cache_;
  Tensor y_cache_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(std::string name, Eigen::Index dim, double eps = 1e-5);

  Tensor apply(const Tensor& x) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect(ParameterList& out);
  void describe(std::vector<TensorEntry>& out) const;

  Parameter& gain() { return gain_; }
  Parameter& shift() { return shift_; }

 private:
  Parameter gain_;
  Parameter shift_;
  double eps_ = 1e-5;
  Tensor xhat_cache_;
  Eigen::VectorXd inv_std_cache_;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::string name, Eigen::Index vocab, Eigen::Index dim, Rng& rng);

  Tensor apply(std::span<const int> ids) const;
  Tensor forward(std::span<const int> ids);
  void backward(const Tensor& dy);
  void collect(ParameterList& out);
  void describe(std::vector<TensorEntry>& out) const;

  Eigen::Index vocab_size() const { return table_.value.rows(); }
  Parameter& table() { return table_; }

 private:
  Parameter table_;
  std::vector<int> ids_cache_;
};

struct AttentionOutput {
  Tensor out;      // [n_q x d_v]
  Tensor weights;  // [n_q x n_k], rows sum to 1
};

struct AttentionGrads {
  Tensor dq;
  Tensor dk;
  Tensor dv;
};

// Single-head scaled dot-product attention. With `causal`, query i may only
// attend keys j <= i (requires n_q == n_k).
AttentionOutput attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal);
AttentionGrads attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                  const Tensor& weights, const Tensor& d_out);

// Multi-head causal self-attention over a packed batch: rows of `x` are the
// concatenation of independent sequences whose lengths are `segments`.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::string name, Eigen::Index dim, int heads, Rng& rng);

  Tensor apply(const Tensor& x, std::span<const Eigen::Index> segments) const;
  Tensor forward(const Tensor& x, std::span<const Eigen::Index> segments);
  Tensor backward(const Tensor& dy);
  void collect(ParameterList& out);
  void describe(std::vector<TensorEntry>& out) const;

  int heads() const { return heads_; }

 private:
  Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v,
                std::span<const Eigen::Index> segments, std::vector<Tensor>* weights) const;

  Dense query_, key_, value_, output_;
  int heads_ = 1;
  Eigen::Index head_dim_ = 0;
  std::vector<Eigen::Index> segments_cache_;
  Tensor q_cache_, k_cache_, v_cache_;
  std::vector<Tensor> weights_cache_;  // per (segment, head)
};

}  // namespace cxr::nn
