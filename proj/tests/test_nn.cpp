#include <gtest/gtest.h>

#include <random>

#include "crlmaze/nn.hpp"
#include "crlmaze/testing/oracles.hpp"

using namespace crlmaze;

TEST(InitParams, DeterministicWithZeroBiases) {
  NetworkConfig net;
  const ParamVector a = init_params(net, 5), b = init_params(net, 5);
  EXPECT_EQ(a, b);
  auto check_bias = [&](const DenseSlice& s) {
    for (int i = 0; i < s.outputs; ++i) EXPECT_EQ(a.bias(s)(i), 0.0);
  };
  for (const auto& s : a.layout().hidden) check_bias(s);
  check_bias(a.layout().policy);
  check_bias(a.layout().value);
}

TEST(InitParams, FanInScaledUniform) {
  NetworkConfig net{392, {128, 128}, 3};
  const ParamVector p = init_params(net, 9);
  const double bound = 1.0 / std::sqrt(392.0);
  const auto w = p.weights(p.layout().hidden[0]);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(w.cwiseAbs().maxCoeff(), 0.9 * bound);
}

TEST(InitParams, SeedsDiffer) {
  const auto r = crlmaze::testing::oracle_init_seeds_differ();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Layout, SizeCountsEveryLayer) {
  NetworkConfig net{10, {4, 3}, 3};
  const ParamLayout l(net);
  EXPECT_EQ(l.size, 10u * 4 + 4 + 4 * 3 + 3 + 3 * 3 + 3 + 3 + 1);
  EXPECT_THROW(ParamLayout(NetworkConfig{10, {4}, 4}), ConfigError);
  EXPECT_THROW(ParamLayout(NetworkConfig{10, {0}, 3}), ConfigError);
}

TEST(Forward, ShapesForFullBatch) {
  NetworkConfig net;
  const ParamVector p = init_params(net, 1);
  const Matrix x = crlmaze::testing::random_batch(400, net.input_size, 3);
  const ForwardResult f = forward(p, x);
  EXPECT_EQ(f.logits.rows(), 400);
  EXPECT_EQ(f.logits.cols(), 3);
  EXPECT_EQ(f.values.size(), 400);
  for (Eigen::Index i = 0; i < 400; ++i) EXPECT_NEAR(softmax(f.logits.row(i)).sum(), 1.0, 1e-9);
}

TEST(Forward, ZeroInputGivesOutputBias) {
  NetworkConfig net{20, {6, 5}, 3};
  const ParamVector p = init_params(net, 2);
  const ForwardResult f = forward(p, Matrix::Zero(3, 20));
  EXPECT_TRUE(f.logits.isZero(0.0));
  EXPECT_TRUE(f.values.isZero(0.0));
}

TEST(Forward, PureAndShapeChecked) {
  NetworkConfig net{20, {6}, 3};
  const ParamVector p = init_params(net, 2);
  const Matrix x = crlmaze::testing::random_batch(4, 20, 1);
  EXPECT_EQ(forward(p, x).logits, forward(p, x).logits);
  EXPECT_THROW(forward(p, Matrix::Zero(2, 19)), ContractViolation);
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  NetworkConfig net{20, {6}, 3};
  const ParamVector p = init_params(net, 2);
  const ForwardResult f = forward(p, crlmaze::testing::random_batch(4, 20, 1));
  const ParamVector g = backward(f.cache, Matrix::Zero(4, 3), Vector::Zero(4));
  EXPECT_TRUE(g.as_eigen().isZero(0.0));
}

TEST(Backward, MatchesFiniteDifferences) {
  const auto r = crlmaze::testing::oracle_backward_finite_difference();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Backward, RandomNetworksMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const int in = 3 + static_cast<int>(rng() % 6);
    NetworkConfig net{in, {2 + static_cast<int>(rng() % 5), 2 + static_cast<int>(rng() % 4)}, 3};
    ParamVector p = init_params(net, rng());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += 0.05;  // move biases off zero
    const Matrix x = crlmaze::testing::random_batch(5, in, rng());
    const Matrix w = crlmaze::testing::random_batch(5, 3, rng());
    const Matrix wv = crlmaze::testing::random_batch(5, 1, rng());
    auto loss = [&](const ParamVector& q) {
      const ForwardResult f = forward(q, x, false);
      return (f.logits.array() * w.array()).sum() + (f.values.array().square() * wv.col(0).array()).sum();
    };
    const ForwardResult f = forward(p, x);
    const Vector dv = 2.0 * f.values.array() * wv.col(0).array();
    const ParamVector g = backward(f.cache, w, dv);
    EXPECT_LE(check_gradient(loss, p, g).max_relative_error, 1e-4);
  }
}

TEST(Backward, AdditiveOverBatch) {
  const auto r = crlmaze::testing::oracle_backward_additive();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Backward, HeadsShareTrunkAdditively) {
  NetworkConfig net{6, {5}, 3};
  const ParamVector p = init_params(net, 4);
  const Matrix x = crlmaze::testing::random_batch(3, 6, 2);
  const Matrix dl = crlmaze::testing::random_batch(3, 3, 5);
  const Vector dv = crlmaze::testing::random_batch(3, 1, 6).col(0);
  const ForwardResult f = forward(p, x);
  const Vector both = backward(f.cache, dl, dv).as_eigen();
  const Vector sum = backward(f.cache, dl, Vector::Zero(3)).as_eigen() +
                     backward(f.cache, Matrix::Zero(3, 3), dv).as_eigen();
  EXPECT_LE((both - sum).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, StaleCacheRejected) {
  NetworkConfig net{6, {5}, 3};
  ParamVector p = init_params(net, 4);
  const ForwardResult f = forward(p, crlmaze::testing::random_batch(2, 6, 2));
  p[0] += 1.0;
  EXPECT_THROW(backward(f.cache, Matrix::Zero(2, 3), Vector::Zero(2)), ContractViolation);
  ForwardCache empty;
  EXPECT_THROW(backward(empty, Matrix::Zero(2, 3), Vector::Zero(2)), ContractViolation);
}

TEST(SquaredGradientSum, EqualsSumOfPerRowSquares) {
  NetworkConfig net{6, {5, 4}, 3};
  const ParamVector p = init_params(net, 8);
  const Matrix x = crlmaze::testing::random_batch(4, 6, 9);
  const Matrix dl = crlmaze::testing::random_batch(4, 3, 10);
  const ForwardResult f = forward(p, x);
  const Vector fast = squared_gradient_sum(f.cache, dl).as_eigen();
  Vector slow = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  for (int i = 0; i < 4; ++i) {
    const ForwardResult one = forward(p, x.row(i));
    slow += backward(one.cache, dl.row(i), Vector::Zero(1)).as_eigen().array().square().matrix();
  }
  EXPECT_LE((fast - slow).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(SampleAction, SaturatedLogitsAlwaysPickFirst) {
  std::mt19937_64 rng(1);
  Eigen::RowVectorXd z(3);
  z << 1000, -1000, -1000;
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(sample_action(z, rng).action, 0);
}

TEST(SampleAction, UniformLogitsGiveThirds) {
  std::mt19937_64 rng(2);
  const Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(3);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 10000; ++i) counts[sample_action(z, rng).action] += 1;
  for (int c : counts) EXPECT_NEAR(c / 10000.0, 1.0 / 3.0, 0.02);
}

TEST(SampleAction, LogProbabilityExact) {
  const auto r = crlmaze::testing::oracle_log_probability();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(SampleAction, LogProbabilityNonPositiveAndStableForHugeLogits) {
  std::mt19937_64 rng(3);
  Eigen::RowVectorXd z(3);
  z << 800, 799, -900;
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_action(z, rng);
    EXPECT_LE(s.log_probability, 0.0);
    EXPECT_TRUE(std::isfinite(s.log_probability));
  }
  EXPECT_EQ(greedy_action(z), 0);
}

TEST(GradCheck, DetectsWrongGradient) {
  NetworkConfig net{2, {}, 3};
  ParamVector p = init_params(net, 1);
  auto loss = [](const ParamVector& q) { return q.as_eigen().squaredNorm(); };
  ParamVector wrong = ParamVector::zeros_like(p);
  for (std::size_t i = 0; i < p.size(); ++i) wrong[i] = 2.0 * p[i] + 0.1;
  EXPECT_GT(check_gradient(loss, p, wrong).max_relative_error, 1e-2);
}

TEST(ParamVector, FingerprintTracksValues) {
  NetworkConfig net{4, {3}, 3};
  ParamVector p = init_params(net, 1);
  const auto before = p.fingerprint();
  p[2] += 1e-12;
  EXPECT_NE(before, p.fingerprint());
}
