#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace knnc {
namespace {

// Textbook bias-corrected Adam, written independently of the library.
struct RefAdam {
  std::vector<double> m, v;
  int t = 0;
  void step(std::vector<double>& theta, const std::vector<double>& g, double lr) {
    if (m.empty()) m.assign(theta.size(), 0.0), v.assign(theta.size(), 0.0);
    ++t;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      theta[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
};

TEST(CrossEntropy, Values) {
  EXPECT_EQ(cross_entropy(Distribution::one_hot(3, 1), 1), 0.0);
  EXPECT_NEAR(cross_entropy(Distribution({0.5, 0.5}), 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(Distribution({0.5, 0.5}), 0), 0.693147, 1e-6);
  EXPECT_NEAR(cross_entropy(Distribution({0.9, 0.1}), 1), 2.302585, 1e-6);
  EXPECT_NEAR(cross_entropy(Distribution({1.0, 0.0}), 1), -std::log(kProbabilityFloor), 1e-12);
  EXPECT_THROW(cross_entropy(Distribution({1.0, 0.0}), 2), Error);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  std::vector<double> p = {1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  AdamState s(3);
  adam_step(p, g, s, 0.1);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepIsLearningRate) {
  std::vector<double> p = {0.0};
  const std::vector<double> g = {1.0};
  AdamState s(1);
  adam_step(p, g, s, 1e-3);
  EXPECT_NEAR(p[0], -1e-3 / (1.0 + 1e-8), 1e-18);
}

TEST(Adam, MatchesReferenceOverManySteps) {
  Rng rng(3);
  std::vector<double> p(5), ref;
  for (double& x : p) x = rng.normal();
  ref = p;
  AdamState s(5);
  RefAdam r;
  for (int step = 0; step < 50; ++step) {
    std::vector<double> g(5);
    for (double& x : g) x = rng.normal();
    adam_step(p, g, s, 1e-2);
    r.step(ref, g, 1e-2);
  }
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(p[i], ref[i], 1e-14);
}

TEST(Adam, Deterministic) {
  std::vector<double> a = {0.5, 0.5}, b = a;
  AdamState sa(2), sb(2);
  const std::vector<double> g = {0.3, -0.7};
  for (int i = 0; i < 10; ++i) {
    adam_step(a, g, sa, 1e-3);
    adam_step(b, g, sb, 1e-3);
  }
  EXPECT_EQ(a, b);
}

TEST(Adam, ScaleConsistent) {
  Rng rng(4);
  std::vector<double> a(8, 0.0), b(8, 0.0);
  AdamState sa(8), sb(8);
  for (int step = 0; step < 20; ++step) {
    std::vector<double> g(8), g10(8);
    for (std::size_t i = 0; i < 8; ++i) {
      g[i] = rng.normal();
      g10[i] = 10.0 * g[i];
    }
    adam_step(a, g, sa, 1e-2);
    adam_step(b, g10, sb, 1e-2);
  }
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(b[i], a[i], 1e-6 * std::abs(a[i]));
}

TEST(Adam, LengthMismatch) {
  std::vector<double> p(3, 0.0);
  const std::vector<double> g(2, 0.0);
  AdamState s(3);
  EXPECT_THROW(adam_step(p, g, s, 1e-3), Error);
}

TEST(FiniteDiff, Quadratic) {
  const std::vector<double> theta = {3.0};
  const std::vector<double> grad = {6.0};
  const double err = finite_diff_check([](std::span<const double> p) { return p[0] * p[0]; }, theta, grad);
  EXPECT_LT(err, 1e-8);
}

TEST(FiniteDiff, DetectsScaledGradient) {
  const std::vector<double> theta = {3.0, -1.0};
  const std::vector<double> wrong = {12.0, -4.0};
  const auto f = [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; };
  EXPECT_NEAR(finite_diff_check(f, theta, wrong), 0.5, 1e-6);
}

TEST(FiniteDiff, SubsetOfCoordinates) {
  std::vector<double> theta(200), grad(200);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta[i] = 0.01 * static_cast<double>(i);
    grad[i] = 3.0 * theta[i] * theta[i];
  }
  grad[17] += 1.0;
  const auto f = [](std::span<const double> p) {
    double s = 0;
    for (double x : p) s += x * x * x;
    return s;
  };
  FiniteDiffOptions opt;
  opt.max_coords = 50;
  opt.seed = 1;
  const double subset = finite_diff_check(f, theta, grad, opt);
  const double all = finite_diff_check(f, theta, grad);
  EXPECT_GT(all, 0.5);
  EXPECT_LE(subset, all);
  grad[17] -= 1.0;
  EXPECT_LT(finite_diff_check(f, theta, grad, opt), 1e-5);
}

TEST(FiniteDiff, NonFiniteLoss) {
  const std::vector<double> theta = {0.0};
  const std::vector<double> grad = {0.0};
  try {
    finite_diff_check([](std::span<const double>) { return std::nan(""); }, theta, grad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
  }
}

TEST(EpochBatches, VisitsEveryRowOnceAndKeepsTail) {
  Rng rng(5);
  const auto batches = epoch_batches(130, 64, rng);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[2].size(), 2u);
  std::set<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 130u);
  Rng again(5);
  EXPECT_EQ(epoch_batches(130, 64, again), batches);
}

TEST(ParamVector, Manifest) {
  ParamVector p;
  p.add_tensor("w", {2, 3});
  p.add_tensor("b", {2});
  EXPECT_EQ(p.size(), 8u);
  EXPECT_EQ(p.tensor_info("b").offset, 6u);
  p.tensor("b")[1] = 4.0;
  EXPECT_EQ(p.values()[7], 4.0);
  EXPECT_THROW(p.add_tensor("w", {1}), Error);
  EXPECT_THROW(p.tensor("missing"), Error);
}

TEST(TrainAdam, FitsLinearRegression) {
  // y = 2x - 1 on 100 points; loss is mean squared error.
  std::vector<double> xs(100), ys(100);
  for (std::size_t i = 0; i < 100; ++i) {
    xs[i] = -1.0 + 0.02 * static_cast<double>(i);
    ys[i] = 2.0 * xs[i] - 1.0;
  }
  ParamVector p;
  p.add_tensor("ab", {2});
  Rng rng(6);
  TrainSchedule sched{0.05, 16, 200};
  const auto curve = train_adam(p, 100, sched, rng, [&](std::span<const double> w, std::span<const std::size_t> rows,
                                                        std::span<double> g) {
    double loss = 0.0;
    for (std::size_t r : rows) {
      const double e = w[0] * xs[r] + w[1] - ys[r];
      loss += e * e;
      g[0] += 2.0 * e * xs[r] / static_cast<double>(rows.size());
      g[1] += 2.0 * e / static_cast<double>(rows.size());
    }
    return loss / static_cast<double>(rows.size());
  });
  EXPECT_EQ(curve.epoch_losses.size(), 200u);
  EXPECT_LT(curve.epoch_losses.back(), curve.initial_loss);
  EXPECT_NEAR(p.values()[0], 2.0, 1e-2);
  EXPECT_NEAR(p.values()[1], -1.0, 1e-2);
}

TEST(FiniteDiff, RetryStepResolvesNearbyKink) {
  // relu(x) at x = 3e-6: the 1e-5 probe straddles the kink, the 1e-7 probe does not.
  const std::vector<double> x{3e-6};
  const std::vector<double> g{1.0};
  auto relu = [](std::span<const double> p) { return std::max(p[0], 0.0); };
  EXPECT_GT(finite_diff_check(relu, x, g), 0.3);
  FiniteDiffOptions opts;
  opts.retry_step = 1e-7;
  EXPECT_LT(finite_diff_check(relu, x, g, opts), 1e-8);
  // A wrong gradient stays wrong at both steps.
  const std::vector<double> bad{2.0};
  EXPECT_GT(finite_diff_check(relu, x, bad, opts), 0.4);
}

}  // namespace
}  // namespace knnc
