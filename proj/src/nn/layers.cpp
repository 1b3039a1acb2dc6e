#include "cxr/nn/layers.hpp"

#include <cmath>
#include <numeric>

#include "cxr/error.hpp"

namespace cxr::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

namespace {

void activate(Tensor& y, Activation act) {
  switch (act) {
    case Activation::identity: break;
    case Activation::relu: y = y.cwiseMax(0.0); break;
    case Activation::sigmoid:
      y = y.unaryExpr([](double z) {
        // Split on sign so exp never overflows.
        if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
        const double e = std::exp(z);
        return e / (1.0 + e);
      });
      break;
  }
}

}  // namespace

// ---- Dense -----------------------------------------------------------------

Dense::Dense(std::string name, Eigen::Index d_in, Eigen::Index d_out, Activation act, Rng& rng,
             double init_gain)
    : weight_(name + ".weight", xavier_uniform(d_in, d_out, rng, init_gain)),
      bias_(name + ".bias", Tensor::Zero(1, d_out)),
      act_(act) {}

Dense::Dense(std::string name, Tensor weight, RowVector bias, Activation act)
    : weight_(name + ".weight", std::move(weight)), bias_(name + ".bias", Tensor(bias)), act_(act) {
  if (bias_.value.cols() != weight_.value.cols()) {
    throw DimensionError("dense bias " + shape_string(bias_.value) + " does not match weight " +
                         shape_string(weight_.value));
  }
}

void Dense::check_input(const Tensor& x) const {
  if (x.cols() != in_dim()) {
    throw DimensionError("dense " + weight_.name + ": input " + shape_string(x) +
                         " incompatible with weight " + shape_string(weight_.value));
  }
}

Tensor Dense::apply(const Tensor& x) const {
  check_input(x);
  Tensor y = x * weight_.value;
  y.rowwise() += bias_.value.row(0);
  activate(y, act_);
  require_finite(y, "dense " + weight_.name + " output");
  return y;
}

Tensor Dense::forward(const Tensor& x) {
  Tensor y = apply(x);
  x_cache_ = x;
  y_cache_ = y;
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  if (dy.rows() != y_cache_.rows() || dy.cols() != y_cache_.cols()) {
    throw DimensionError("dense " + weight_.name + ": upstream gradient " + shape_string(dy) +
                         " does not match output " + shape_string(y_cache_));
  }
  Tensor dz;
  switch (act_) {
    case Activation::identity: dz = dy; break;
    case Activation::relu: dz = (y_cache_.array() > 0.0).select(dy, 0.0); break;
    case Activation::sigmoid:
      dz = (dy.array() * y_cache_.array() * (1.0 - y_cache_.array())).matrix();
      break;
  }
  weight_.grad.noalias() += x_cache_.transpose() * dz;
  bias_.grad.row(0) += dz.colwise().sum();
  Tensor dx = dz * weight_.value.transpose();
  require_finite(dx, "dense " + weight_.name + " input gradient");
  return dx;
}

void Dense::collect(ParameterList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

void Dense::describe(std::vector<TensorEntry>& out) const {
  const std::string tag(to_string(act_));
  out.push_back({weight_.name, tag, &weight_.value});
  out.push_back({bias_.name, tag, &bias_.value});
}

// ---- LayerNorm -------------------------------------------------------------

LayerNorm::LayerNorm(std::string name, Eigen::Index dim, double eps)
    : gain_(name + ".gain", Tensor::Ones(1, dim)), shift_(name + ".shift", Tensor::Zero(1, dim)), eps_(eps) {}

Tensor LayerNorm::apply(const Tensor& x) const {
  if (x.cols() != gain_.value.cols()) {
    throw DimensionError("layer norm " + gain_.name + ": input " + shape_string(x) +
                         " expects width " + std::to_string(gain_.value.cols()));
  }
  Tensor y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps_);
    y.row(r) = ((x.row(r).array() - mean) * inv * gain_.value.row(0).array() +
                shift_.value.row(0).array())
                   .matrix();
  }
  return y;
}

Tensor LayerNorm::forward(const Tensor& x) {
  const Tensor y = apply(x);
  xhat_cache_.resize(x.rows(), x.cols());
  inv_std_cache_.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std_cache_(r) = 1.0 / std::sqrt(var + eps_);
    xhat_cache_.row(r) = (x.row(r).array() - mean) * inv_std_cache_(r);
  }
  return y;
}

Tensor LayerNorm::backward(const Tensor& dy) {
  const double n = static_cast<double>(dy.cols());
  gain_.grad.row(0) += (dy.array() * xhat_cache_.array()).matrix().colwise().sum();
  shift_.grad.row(0) += dy.colwise().sum();
  Tensor dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Eigen::ArrayXd dxhat = (dy.row(r).array() * gain_.value.row(0).array()).transpose();
    const Eigen::ArrayXd xhat = xhat_cache_.row(r).array().transpose();
    const double sum_dxhat = dxhat.sum();
    const double sum_dxhat_xhat = (dxhat * xhat).sum();
    dx.row(r) = ((n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat) * (inv_std_cache_(r) / n))
                    .matrix()
                    .transpose();
  }
  return dx;
}

void LayerNorm::collect(ParameterList& out) {
  out.push_back(&gain_);
  out.push_back(&shift_);
}

void LayerNorm::describe(std::vector<TensorEntry>& out) const {
  out.push_back({gain_.name, "none", &gain_.value});
  out.push_back({shift_.name, "none", &shift_.value});
}

// ---- Embedding -------------------------------------------------------------

Embedding::Embedding(std::string name, Eigen::Index vocab, Eigen::Index dim, Rng& rng)
    : table_(name + ".table", xavier_uniform(vocab, dim, rng)) {}

Tensor Embedding::apply(std::span<const int> ids) const {
  Tensor out(static_cast<Eigen::Index>(ids.size()), table_.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table_.value.rows()) {
      throw DimensionError("embedding " + table_.name + ": id " + std::to_string(ids[i]) +
                           " outside vocabulary of " + std::to_string(table_.value.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = table_.value.row(ids[i]);
  }
  return out;
}

Tensor Embedding::forward(std::span<const int> ids) {
  Tensor out = apply(ids);
  ids_cache_.assign(ids.begin(), ids.end());
  return out;
}

void Embedding::backward(const Tensor& dy) {
  for (std::size_t i = 0; i < ids_cache_.size(); ++i) {
    table_.grad.row(ids_cache_[i]) += dy.row(static_cast<Eigen::Index>(i));
  }
}

void Embedding::collect(ParameterList& out) { out.push_back(&table_); }

void Embedding::describe(std::vector<TensorEntry>& out) const { out.push_back({table_.name, "none", &table_.value}); }

// ---- attention -------------------------------------------------------------

AttentionOutput attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw DimensionError("attention: q " + shape_string(q) + ", k " + shape_string(k) + ", v " +
                         shape_string(v) + " are incompatible");
  }
  if (causal && q.rows() != k.rows()) {
    throw DimensionError("causal attention needs as many queries as keys: q " + shape_string(q) +
                         ", k " + shape_string(k));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor scores = (q * k.transpose()) * scale;
  Tensor weights(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const Eigen::Index visible = causal ? i + 1 : scores.cols();
    auto row = scores.row(i).head(visible);
    const double m = row.maxCoeff();
    weights.row(i).head(visible) = (row.array() - m).exp().matrix();
    weights.row(i).head(visible) /= weights.row(i).head(visible).sum();
    weights.row(i).tail(scores.cols() - visible).setZero();
  }
  Tensor out = weights * v;
  return {std::move(out), std::move(weights)};
}

AttentionGrads attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                  const Tensor& weights, const Tensor& d_out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  AttentionGrads g;
  g.dv = weights.transpose() * d_out;
  const Tensor d_weights = d_out * v.transpose();
  // Softmax Jacobian; masked entries have zero weight so they drop out.
  Tensor d_scores = weights.array() *
                    (d_weights.array().colwise() -
                     (d_weights.array() * weights.array()).rowwise().sum());
  g.dq = d_scores * k * scale;
  g.dk = d_scores.transpose() * q * scale;
  return g;
}

// ---- MultiHeadAttention ----------------------------------------------------

MultiHeadAttention::MultiHeadAttention(std::string name, Eigen::Index dim, int heads, Rng& rng)
    : query_(name + ".query", dim, dim, Activation::identity, rng),
      key_(name + ".key", dim, dim, Activation::identity, rng),
      value_(name + ".value", dim, dim, Activation::identity, rng),
      output_(name + ".output", dim, dim, Activation::identity, rng),
      heads_(heads) {
  if (heads <= 0 || dim % heads != 0) {
    throw DimensionError("attention " + name + ": model width " + std::to_string(dim) +
                         " not divisible by " + std::to_string(heads) + " heads");
  }
  head_dim_ = dim / heads;
}

Tensor MultiHeadAttention::attend(const Tensor& q, const Tensor& k, const Tensor& v,
                                  std::span<const Eigen::Index> segments,
                                  std::vector<Tensor>* weights) const {
  const Eigen::Index total = std::accumulate(segments.begin(), segments.end(), Eigen::Index{0});
  if (total != q.rows()) {
    throw DimensionError("attention: segment lengths sum to " + std::to_string(total) + " but input has " +
                         std::to_string(q.rows()) + " rows");
  }
  Tensor out(q.rows(), q.cols());
  Eigen::Index offset = 0;
  for (const Eigen::Index len : segments) {
    for (int h = 0; h < heads_; ++h) {
      const Eigen::Index c0 = h * head_dim_;
      auto res = attention(q.block(offset, c0, len, head_dim_), k.block(offset, c0, len, head_dim_),
                           v.block(offset, c0, len, head_dim_), /*causal=*/true);
      out.block(offset, c0, len, head_dim_) = res.out;
      if (weights) weights->push_back(std::move(res.weights));
    }
    offset += len;
  }
  return out;
}

Tensor MultiHeadAttention::apply(const Tensor& x, std::span<const Eigen::Index> segments) const {
  const Tensor q = query_.apply(x);
  const Tensor k = key_.apply(x);
  const Tensor v = value_.apply(x);
  return output_.apply(attend(q, k, v, segments, nullptr));
}

Tensor MultiHeadAttention::forward(const Tensor& x, std::span<const Eigen::Index> segments) {
  segments_cache_.assign(segments.begin(), segments.end());
  q_cache_ = query_.forward(x);
  k_cache_ = key_.forward(x);
  v_cache_ = value_.forward(x);
  weights_cache_.clear();
  return output_.forward(attend(q_cache_, k_cache_, v_cache_, segments, &weights_cache_));
}

Tensor MultiHeadAttention::backward(const Tensor& dy) {
  const Tensor d_attn = output_.backward(dy);
  Tensor dq(d_attn.rows(), d_attn.cols());
  Tensor dk(d_attn.rows(), d_attn.cols());
  Tensor dv(d_attn.rows(), d_attn.cols());
  Eigen::Index offset = 0;
  std::size_t w = 0;
  for (const Eigen::Index len : segments_cache_) {
    for (int h = 0; h < heads_; ++h) {
      const Eigen::Index c0 = h * head_dim_;
      auto g = attention_backward(q_cache_.block(offset, c0, len, head_dim_),
                                  k_cache_.block(offset, c0, len, head_dim_),
                                  v_cache_.block(offset, c0, len, head_dim_), weights_cache_[w++],
                                  d_attn.block(offset, c0, len, head_dim_));
      dq.block(offset, c0, len, head_dim_) = g.dq;
      dk.block(offset, c0, len, head_dim_) = g.dk;
      dv.block(offset, c0, len, head_dim_) = g.dv;
    }
    offset += len;
  }
  Tensor dx = query_.backward(dq);
  dx += key_.backward(dk);
  dx += value_.backward(dv);
  return dx;
}

void MultiHeadAttention::collect(ParameterList& out) {
  query_.collect(out);
  key_.collect(out);
  value_.collect(out);
  output_.collect(out);
}

void MultiHeadAttention::describe(std::vector<TensorEntry>& out) const {
  query_.describe(out);
  key_.describe(out);
  value_.describe(out);
  output_.describe(out);
}

}  // namespace cxr::nn
