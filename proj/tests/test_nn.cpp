#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"

using namespace wefend;

TEST(Linear, IdentityWeightPassesInputThrough) {
  Tensor x({1, 2}, {1, 2});
  Parameter w(Tensor({2, 2}, {1, 0, 0, 1}));
  const Tensor y = linear(x, w);
  EXPECT_EQ(y.shape(), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 2.0);
}

TEST(Linear, BasisVectorsReadOutRows) {
  Tensor x({2, 2}, {1, 0, 0, 1});
  Parameter w(Tensor({2, 1}, {3, 5}));
  const Tensor y = linear(x, w);
  EXPECT_EQ(y[0], 3.0);
  EXPECT_EQ(y[1], 5.0);
}

TEST(Linear, ShapeMismatchThrows) {
  Tensor x({1, 3});
  Parameter w(Tensor({2, 2}));
  EXPECT_THROW(linear(x, w), DimensionError);
}

TEST(Linear, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  Tensor x = Tensor::uniform({3, 4}, -1, 1, rng);
  Parameter w(Tensor::uniform({4, 2}, -1, 1, rng));
  Tensor target = Tensor::uniform({3, 2}, -1, 1, rng);
  ParameterRefs params{{"w", &w}};
  auto loss = [&](bool with_grad) {
    const Tensor y = linear(x, w);
    double l = 0.0;
    Tensor g(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - target[i];
      l += 0.5 * d * d;
      g[i] = d;
    }
    if (with_grad) linear_backward(x, w, g);
    return l;
  };
  Rng probe(4);
  EXPECT_LT(grad_check(loss, params, 8, probe).max_relative_error, 1e-6);
}

TEST(Activations, ReluClampsNegatives) {
  const Tensor y = relu(Tensor({3}, {-1, 0, 2}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 2.0);
}

TEST(Activations, SigmoidSymmetryPointAndGradient) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  const Tensor y = sigmoid(Tensor({1}, {0.0}));
  const Tensor g = sigmoid_backward(y, Tensor({1}, {1.0}));
  EXPECT_DOUBLE_EQ(g[0], 0.25);
  const double h = 1e-5;
  EXPECT_NEAR((sigmoid(h) - sigmoid(-h)) / (2 * h), 0.25, 1e-9);
}

TEST(Activations, SigmoidStaysInsideUnitIntervalForModerateInputs) {
  for (double x : {-30.0, -5.0, 5.0, 30.0}) {
    EXPECT_GT(sigmoid(x), 0.0);
    EXPECT_LT(sigmoid(x), 1.0);
  }
}

TEST(Bce, KnownValues) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.5, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.9, 1), -std::log(0.9), 1e-12);
  EXPECT_NEAR(bce_loss(0.9, 1), 0.10536, 1e-5);
}

TEST(Bce, ClampKeepsLossFiniteAndNonNegative) {
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
  for (double p : {1e-9, 0.1, 0.5, 0.7, 1.0}) {
    EXPECT_GE(bce_loss(p, 0), 0.0);
    EXPECT_GE(bce_loss(p, 1), 0.0);
  }
}

TEST(Bce, RejectsNonBinaryLabel) { EXPECT_THROW(bce_loss(0.5, 2), DomainError); }

TEST(Bce, GradientMatchesFiniteDifferences) {
  const double h = 1e-6;
  for (double p : {0.2, 0.5, 0.8})
    for (int y : {0, 1}) EXPECT_NEAR(bce_grad(p, y), (bce_loss(p + h, y) - bce_loss(p - h, y)) / (2 * h), 1e-6);
}

TEST(Adam, ZeroGradientLeavesValuesButCountsStep) {
  Parameter p(Tensor({2}, {1.5, -2.0}));
  AdamConfig cfg;
  adam_step({{"p", &p}}, cfg);
  EXPECT_EQ(p.value[0], 1.5);
  EXPECT_EQ(p.value[1], -2.0);
  EXPECT_EQ(cfg.step_count, 1);
}

// Scalar reference Adam written out independently of the library.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double x, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p(Tensor({1}, {0.0}));
  AdamConfig cfg;
  p.grad[0] = 1.0;
  adam_step({{"p", &p}}, cfg);
  EXPECT_NEAR(p.value[0], -cfg.learning_rate / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Adam, TwoStepsMatchReferenceTrace) {
  Parameter p(Tensor({1}, {0.3}));
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  ScalarAdam ref;
  double x = 0.3;
  for (int k = 0; k < 2; ++k) {
    p.grad[0] = 0.7;
    adam_step({{"p", &p}}, cfg);
    x = ref.step(x, 0.7, 0.01);
    EXPECT_NEAR(p.value[0], x, 1e-12);
  }
}

TEST(Adam, RejectsInvalidConfig) {
  Parameter p(Tensor({1}));
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(adam_step({{"p", &p}}, cfg), ConfigError);
}

TEST(GradCheck, ConstantLossHasZeroError) {
  Parameter p(Tensor({3}, {1, 2, 3}));
  Rng rng(1);
  const auto r = grad_check([](bool) { return 4.0; }, {{"p", &p}}, 5, rng);
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_EQ(r.probes, 5u);
}

TEST(GradCheck, FlagsWrongGradient) {
  Parameter p(Tensor({2}, {1, 2}));
  auto loss = [&](bool with_grad) {
    if (with_grad) p.grad[0] += 3.0 * p.value[0];  // true gradient is 2x
    return p.value[0] * p.value[0];
  };
  Rng rng(1);
  EXPECT_GT(grad_check(loss, {{"p", &p}}, 20, rng).max_relative_error, 0.1);
}

TEST(GradCheck, FullDetectorWithinTolerance) {
  Rng rng(11);
  auto emb = EmbeddingTable::random(30, 6, rng);
  Detector model(emb, wefend::testing::small_extractor(), rng);
  std::vector<Example> data;
  for (int i = 0; i < 4; ++i) data.push_back({wefend::testing::random_tokens(9, 30, rng), i % 2});
  std::vector<std::size_t> batch{0, 1, 2, 3};
  auto params = model.params();
  Rng probe(12);
  const auto r = grad_check([&](bool g) { return detector_bce(model, data, batch, 1.0, g); }, params, 100, probe, 1e-5,
                            [](const NamedParameter& np, std::size_t i) { return np.name == "embedding" && i < 6; });
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(Rng, StreamsAreReproducibleAndIndependent) {
  Rng a = make_stream(7, "x"), b = make_stream(7, "x"), c = make_stream(7, "y");
  const auto va = a.next_u64();
  EXPECT_EQ(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
  EXPECT_NE(derive_seed(1, "x"), derive_seed(2, "x"));
}

TEST(Rng, SampleWithoutReplacementIsUnique) {
  Rng rng(5);
  auto s = rng.sample_without_replacement(50, 20);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
  EXPECT_LT(s.back(), 50u);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(2);
  Parameter a = glorot_parameter(3, 4, rng), b(Tensor::uniform({5}, -1, 1, rng));
  std::stringstream ss;
  write_checkpoint(ss, {{"a", &a}, {"b", &b}});
  Parameter a2(Tensor({3, 4})), b2(Tensor({5}));
  assign_checkpoint(read_checkpoint(ss), {{"a", &a2}, {"b", &b2}});
  EXPECT_EQ(a.value, a2.value);
  EXPECT_EQ(b.value, b2.value);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  Parameter a(Tensor({2, 2}));
  std::stringstream ss;
  write_checkpoint(ss, {{"a", &a}});
  Parameter wrong(Tensor({3}));
  EXPECT_THROW(assign_checkpoint(read_checkpoint(ss), {{"a", &wrong}}), DimensionError);
}

TEST(Checkpoint, BadMagicIsRejected) {
  std::stringstream ss("XXXXjunk");
  EXPECT_THROW(read_checkpoint(ss), ParseError);
}
