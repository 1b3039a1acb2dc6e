#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "cxr/error.hpp"
#include "cxr/nn/grad_check.hpp"
#include "cxr/nn/layers.hpp"
#include "cxr/nn/loss.hpp"
#include "cxr/nn/optimizer.hpp"
#include "support.hpp"

using namespace cxr;
using cxr::testing::mat;
using cxr::testing::random_tensor;

namespace {

// Sum of row-wise cross-entropy against fixed targets, a generic scalar head
// for checking layers that output a tensor.
double ce_head(const nn::Tensor& y, const std::vector<int>& targets, nn::Tensor* dy) {
  const auto l = nn::cross_entropy_rows(y, targets);
  if (dy) *dy = l.grad;
  return l.loss;
}

}  // namespace

// ---- dense ----

TEST(Dense, IdentityWeightsPassInputThrough) {
  nn::Dense d("d", mat({{1, 0}, {0, 1}}), nn::RowVector::Zero(2), nn::Activation::identity);
  const nn::Tensor x = mat({{1, 0}, {0, 1}});
  EXPECT_EQ(d.apply(x), x);
}

TEST(Dense, ZeroWeightsGiveBias) {
  nn::Dense d("d", nn::Tensor::Zero(3, 4), nn::RowVector::Constant(4, 2.5), nn::Activation::identity);
  nn::Rng rng(1);
  const nn::Tensor y = d.apply(random_tensor(5, 3, rng));
  EXPECT_TRUE((y.array() == 2.5).all());
}

TEST(Dense, ManualMatrixOracle) {
  nn::Dense d("d", mat({{1, 0}, {0, 1}, {1, 1}}), nn::RowVector::Zero(2), nn::Activation::relu);
  const nn::Tensor y = d.forward(mat({{1, 2, 3}}));
  // [1 2 3] . W = [1+3, 2+3]
  EXPECT_EQ(y, mat({{4, 5}}));
}

TEST(Dense, ShapeMismatchNamesBothShapes) {
  nn::Rng rng(1);
  nn::Dense d("d", 3, 2, nn::Activation::identity, rng);
  try {
    d.apply(nn::Tensor::Zero(1, 4));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3x2]"), std::string::npos) << msg;
  }
}

TEST(Dense, ReluNonNegativeSigmoidInOpenUnitInterval) {
  nn::Rng rng(3);
  nn::Dense r("r", 6, 5, nn::Activation::relu, rng);
  nn::Dense s("s", 6, 5, nn::Activation::sigmoid, rng);
  const nn::Tensor x = random_tensor(50, 6, rng, 3.0);
  EXPECT_TRUE((r.apply(x).array() >= 0).all());
  const nn::Tensor y = s.apply(x);
  EXPECT_TRUE((y.array() > 0).all() && (y.array() < 1).all());
}

TEST(Dense, XavierBoundsAndZeroBias) {
  nn::Rng rng(5);
  nn::Dense d("d", 30, 20, nn::Activation::identity, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  EXPECT_LE(d.weight().value.cwiseAbs().maxCoeff(), bound);
  EXPECT_TRUE(d.bias().value.isZero());
}

TEST(Dense, NonFiniteInputRejected) {
  nn::Rng rng(1);
  nn::Dense d("d", 2, 2, nn::Activation::identity, rng);
  nn::Tensor x = nn::Tensor::Zero(1, 2);
  x(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(d.forward(x), NonFiniteError);
}

// ---- losses ----

TEST(CrossEntropy, UniformLogits) {
  const std::vector<double> z(4, 0.7);
  EXPECT_NEAR(nn::cross_entropy(z, 2).loss, std::log(4.0), 1e-12);
}

TEST(CrossEntropy, HandComputedSoftmax) {
  const std::vector<double> z = {1, 2, 3};
  const double oracle = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  const auto l = nn::cross_entropy(z, 2);
  EXPECT_NEAR(l.loss, oracle, 1e-12);
  EXPECT_NEAR(l.loss, 0.4076, 1e-4);
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(l.grad(0), std::exp(1.0) / denom, 1e-12);
  EXPECT_NEAR(l.grad(2), std::exp(3.0) / denom - 1.0, 1e-12);
}

TEST(CrossEntropy, LossFallsMonotonicallyToZeroAsTargetLogitGrows) {
  double prev = std::numeric_limits<double>::infinity();
  for (double big = 0; big <= 800; big += 10) {
    const double l = nn::cross_entropy(std::vector<double>{0.3, big, -1.0}, 1).loss;
    EXPECT_LE(l, prev);
    EXPECT_GE(l, 0.0);
    prev = l;
  }
  EXPECT_LT(prev, 1e-300 + 1e-12);
}

TEST(CrossEntropy, ShiftInvariance) {
  nn::Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(7), shifted(7);
    for (auto& v : z) v = 3 * rng.normal();
    const double c = rng.uniform(-50, 50);
    for (std::size_t i = 0; i < z.size(); ++i) shifted[i] = z[i] + c;
    const int t = static_cast<int>(rng.below(7));
    EXPECT_NEAR(nn::cross_entropy(z, t).loss, nn::cross_entropy(shifted, t).loss, 1e-9);
  }
}

TEST(CrossEntropy, TargetOutOfRange) {
  EXPECT_THROW(nn::cross_entropy(std::vector<double>{1, 2}, 2), ValidationError);
  EXPECT_THROW(nn::cross_entropy(std::vector<double>{1, 2}, -1), ValidationError);
}

TEST(CrossEntropy, ExtremeLogitsStayFinite) {
  const auto l = nn::cross_entropy(std::vector<double>{1000, -1000, 0}, 1);
  EXPECT_TRUE(std::isfinite(l.loss));
  EXPECT_NEAR(l.loss, 2000, 1e-9);
}

TEST(BinaryCrossEntropy, SymmetricPoint) {
  EXPECT_NEAR(nn::binary_cross_entropy(0, 1).loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(nn::binary_cross_entropy(0, 0).loss, std::log(2.0), 1e-15);
}

TEST(BinaryCrossEntropy, HandComputed) {
  const auto l = nn::binary_cross_entropy(2, 1);
  EXPECT_NEAR(l.loss, std::log1p(std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(l.loss, 0.1269, 1e-4);
  EXPECT_NEAR(l.grad, 1 / (1 + std::exp(-2.0)) - 1, 1e-15);
}

TEST(BinaryCrossEntropy, StableAtExtremes) {
  EXPECT_NEAR(nn::binary_cross_entropy(-800, 1).loss, 800, 1e-9);
  EXPECT_NEAR(nn::binary_cross_entropy(800, 0).loss, 800, 1e-9);
  EXPECT_EQ(nn::binary_cross_entropy(800, 1).loss, 0.0);
}

TEST(BinaryCrossEntropy, NonBinaryLabel) { EXPECT_THROW(nn::binary_cross_entropy(0.5, 2), ValidationError); }

// ---- optimizer ----

TEST(AdamW, ZeroGradientZeroDecayLeavesParameters) {
  nn::Rng rng(2);
  nn::Parameter p("p", random_tensor(3, 4, rng));
  const nn::Tensor before = p.value;
  nn::AdamW opt({1e-2, 0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 10; ++i) opt.step({&p});
  EXPECT_EQ(p.value, before);
}

TEST(AdamW, ConstantGradientUpdateApproachesLearningRate) {
  // Scalar Adam simulation oracle alongside the library update.
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.37;
  nn::Parameter p("p", nn::Tensor::Constant(1, 1, 1.0));
  nn::AdamW opt({lr, b1, b2, eps, 0.0});
  double x = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 200; ++t) {
    p.grad.setConstant(g);
    const double before = p.value(0, 0);
    opt.step({&p});
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    EXPECT_NEAR(p.value(0, 0), x, 1e-12);
    EXPECT_NEAR(std::abs(before - p.value(0, 0)), lr, 1e-9);
  }
}

TEST(AdamW, DecoupledDecayClosedForm) {
  const double lr = 0.1, wd = 0.05;
  nn::Parameter p("p", nn::Tensor::Constant(2, 2, 3.0));
  nn::AdamW opt({lr, 0.9, 0.999, 1e-8, wd});
  for (int t = 1; t <= 20; ++t) {
    opt.step({&p});
    EXPECT_NEAR(p.value(0, 0), 3.0 * std::pow(1 - lr * wd, t), 1e-12);
  }
}

TEST(AdamW, BitwiseDeterministic) {
  auto run = [] {
    nn::Rng rng(9);
    nn::Parameter a("a", random_tensor(4, 4, rng)), b("b", random_tensor(1, 7, rng));
    nn::AdamW opt({1e-2, 0.9, 0.999, 1e-8, 0.01});
    for (int i = 0; i < 25; ++i) {
      a.grad = random_tensor(4, 4, rng);
      b.grad = random_tensor(1, 7, rng);
      opt.step({&a, &b});
    }
    return std::make_pair(a.value, b.value);
  };
  const auto x = run(), y = run();
  EXPECT_EQ(std::memcmp(x.first.data(), y.first.data(), sizeof(double) * 16), 0);
  EXPECT_EQ(std::memcmp(x.second.data(), y.second.data(), sizeof(double) * 7), 0);
}

TEST(AdamW, StepCountIncreasesAndShapeMismatchThrows) {
  nn::Parameter p("p", nn::Tensor::Zero(2, 2));
  nn::AdamW opt;
  opt.step({&p});
  opt.step({&p});
  EXPECT_EQ(opt.steps(), 2);
  nn::Parameter q("q", nn::Tensor::Zero(3, 2));
  EXPECT_THROW(opt.step({&q}), DimensionError);
  nn::Parameter r("r", nn::Tensor::Zero(2, 2));
  r.grad = nn::Tensor::Zero(1, 2);
  nn::AdamW fresh;
  EXPECT_THROW(fresh.step({&r}), DimensionError);
}

// ---- gradient checks ----

TEST(GradCheck, DenseWithCrossEntropy) {
  nn::Rng rng(21);
  nn::Dense d("d", 5, 4, nn::Activation::identity, rng);
  d.bias().value = random_tensor(1, 4, rng, 0.1);
  const nn::Tensor x = random_tensor(6, 5, rng);
  const std::vector<int> targets = {0, 3, 1, 2, 2, 0};
  nn::ParameterList params;
  d.collect(params);
  const auto result = nn::grad_check(
      [&](bool grad) {
        nn::Tensor dy;
        const double l = ce_head(grad ? d.forward(x) : d.apply(x), targets, grad ? &dy : nullptr);
        if (grad) d.backward(dy);
        return l;
      },
      params);
  EXPECT_LE(result.max_rel_error, 1e-4) << result.worst_parameter;
  EXPECT_EQ(result.coordinates_checked, 5u * 4 + 4);
}

class DenseActivationGrad : public ::testing::TestWithParam<nn::Activation> {};

TEST_P(DenseActivationGrad, InputAndParameterGradients) {
  nn::Rng rng(22);
  nn::Dense d("d", 4, 3, GetParam(), rng);
  d.bias().value = random_tensor(1, 3, rng, 0.3);
  nn::Parameter x("x", random_tensor(5, 4, rng));
  const std::vector<int> targets = {0, 1, 2, 1, 0};
  nn::ParameterList params;
  d.collect(params);
  params.push_back(&x);
  const auto result = nn::grad_check(
      [&](bool grad) {
        nn::Tensor dy;
        const double l = ce_head(grad ? d.forward(x.value) : d.apply(x.value), targets, grad ? &dy : nullptr);
        if (grad) x.grad += d.backward(dy);
        return l;
      },
      params);
  EXPECT_LE(result.max_rel_error, 1e-4) << result.worst_parameter << "[" << result.worst_index << "]";
}

INSTANTIATE_TEST_SUITE_P(Activations, DenseActivationGrad,
                         ::testing::Values(nn::Activation::identity, nn::Activation::relu, nn::Activation::sigmoid));

TEST(GradCheck, LayerNorm) {
  nn::Rng rng(23);
  nn::LayerNorm ln("ln", 6);
  ln.gain().value = random_tensor(1, 6, rng, 0.5).array() + 1.0;
  ln.shift().value = random_tensor(1, 6, rng, 0.1);
  nn::Parameter x("x", random_tensor(4, 6, rng, 2.0));
  const std::vector<int> targets = {5, 0, 2, 3};
  nn::ParameterList params;
  ln.collect(params);
  params.push_back(&x);
  const auto result = nn::grad_check(
      [&](bool grad) {
        nn::Tensor dy;
        const double l = ce_head(grad ? ln.forward(x.value) : ln.apply(x.value), targets, grad ? &dy : nullptr);
        if (grad) x.grad += ln.backward(dy);
        return l;
      },
      params);
  EXPECT_LE(result.max_rel_error, 1e-4) << result.worst_parameter;
}

TEST(GradCheck, Embedding) {
  nn::Rng rng(24);
  nn::Embedding e("e", 7, 5, rng);
  const std::vector<int> ids = {3, 1, 3, 6, 0};
  const std::vector<int> targets = {1, 4, 0, 2, 3};
  nn::ParameterList params;
  e.collect(params);
  const auto result = nn::grad_check(
      [&](bool grad) {
        nn::Tensor dy;
        const double l = ce_head(grad ? e.forward(ids) : e.apply(ids), targets, grad ? &dy : nullptr);
        if (grad) e.backward(dy);
        return l;
      },
      params);
  EXPECT_LE(result.max_rel_error, 1e-4) << result.worst_parameter;
}

TEST(GradCheck, ScaledDotProductAttention) {
  nn::Rng rng(25);
  for (bool causal : {false, true}) {
    nn::Parameter q("q", random_tensor(4, 3, rng)), k("k", random_tensor(4, 3, rng)), v("v", random_tensor(4, 5, rng));
    const std::vector<int> targets = {0, 4, 2, 1};
    const auto result = nn::grad_check(
        [&](bool grad) {
          const auto out = nn::attention(q.value, k.value, v.value, causal);
          nn::Tensor dy;
          const double l = ce_head(out.out, targets, grad ? &dy : nullptr);
          if (grad) {
            const auto g = nn::attention_backward(q.value, k.value, v.value, out.weights, dy);
            q.grad += g.dq;
            k.grad += g.dk;
            v.grad += g.dv;
          }
          return l;
        },
        {&q, &k, &v});
    EXPECT_LE(result.max_rel_error, 1e-4) << "causal=" << causal << " " << result.worst_parameter;
  }
}

TEST(GradCheck, MultiHeadAttentionOverPackedSegments) {
  nn::Rng rng(26);
  nn::MultiHeadAttention mha("mha", 8, 2, rng);
  nn::Parameter x("x", random_tensor(7, 8, rng));
  const std::vector<Eigen::Index> segments = {3, 4};
  const std::vector<int> targets = {0, 7, 3, 2, 5, 1, 6};
  nn::ParameterList params;
  mha.collect(params);
  params.push_back(&x);
  const auto result = nn::grad_check(
      [&](bool grad) {
        nn::Tensor dy;
        const double l =
            ce_head(grad ? mha.forward(x.value, segments) : mha.apply(x.value, segments), targets, grad ? &dy : nullptr);
        if (grad) x.grad += mha.backward(dy);
        return l;
      },
      params);
  EXPECT_LE(result.max_rel_error, 1e-4) << result.worst_parameter;
}

TEST(GradCheck, BinaryCrossEntropyThroughDense) {
  nn::Rng rng(27);
  nn::Dense d("d", 4, 1, nn::Activation::identity, rng);
  const nn::Tensor x = random_tensor(6, 4, rng);
  const std::vector<int> labels = {1, 0, 0, 1, 1, 0};
  nn::ParameterList params;
  d.collect(params);
  const auto result = nn::grad_check(
      [&](bool grad) {
        const nn::Tensor z = grad ? d.forward(x) : d.apply(x);
        nn::Tensor dz(z.rows(), 1);
        double l = 0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
          const auto b = nn::binary_cross_entropy(z(i, 0), labels[static_cast<std::size_t>(i)]);
          l += b.loss / 6.0;
          dz(i, 0) = b.grad / 6.0;
        }
        if (grad) d.backward(dz);
        return l;
      },
      params);
  EXPECT_LE(result.max_rel_error, 1e-4);
}

TEST(GradCheck, ConstantFunctionHasZeroGradients) {
  nn::Parameter p("p", nn::Tensor::Constant(2, 3, 1.5));
  const auto result = nn::grad_check([](bool) { return 4.2; }, {&p});
  EXPECT_EQ(result.max_rel_error, 0.0);
  EXPECT_TRUE(p.grad.isZero());
}

TEST(GradCheck, DoubledGradientIsCaught) {
  nn::Rng rng(28);
  nn::Dense d("d", 3, 3, nn::Activation::identity, rng);
  const nn::Tensor x = random_tensor(4, 3, rng);
  const std::vector<int> targets = {0, 1, 2, 0};
  nn::ParameterList params;
  d.collect(params);
  const auto result = nn::grad_check(
      [&](bool grad) {
        nn::Tensor dy;
        const double l = ce_head(grad ? d.forward(x) : d.apply(x), targets, grad ? &dy : nullptr);
        if (grad) d.backward(2.0 * dy);
        return l;
      },
      params);
  EXPECT_NEAR(result.max_rel_error, 1.0, 1e-3);
}

TEST(GradCheck, NonFiniteLossRejected) {
  nn::Parameter p("p", nn::Tensor::Zero(1, 1));
  EXPECT_THROW(nn::grad_check([](bool) { return std::numeric_limits<double>::infinity(); }, {&p}), NonFiniteError);
}

TEST(Rng, SameSeedSameStream) {
  nn::Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, NormalMoments) {
  nn::Rng rng(1);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}
