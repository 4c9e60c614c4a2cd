#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace knnc {
namespace {

Neighbor nb(double d, std::size_t v, std::size_t i = 0) { return Neighbor{d, v, i}; }

// Plain matrix arithmetic forward pass, independent of the library kernels.
std::vector<double> oracle_forward(const AnsModel& m, const std::vector<double>& x) {
  const auto w1 = m.params.tensor("w1");
  const auto b1 = m.params.tensor("b1");
  const auto w2 = m.params.tensor("w2");
  const auto b2 = m.params.tensor("b2");
  const std::size_t n_in = 2 * m.k_max;
  std::vector<double> h(m.hidden);
  for (std::size_t r = 0; r < m.hidden; ++r) {
    double z = b1[r];
    for (std::size_t c = 0; c < n_in; ++c) z += w1[r * n_in + c] * x[c];
    h[r] = std::max(0.0, z);
  }
  std::vector<double> logits(m.choices.size());
  for (std::size_t r = 0; r < logits.size(); ++r) {
    double z = b2[r];
    for (std::size_t c = 0; c < m.hidden; ++c) z += w2[r * m.hidden + c] * h[c];
    logits[r] = z;
  }
  return testing::softmax_ref(logits);
}

AnsModel random_model(std::uint64_t seed, std::size_t k_max = 16, std::size_t hidden = 32) {
  AnsModel m = make_ans_model(k_max, hidden);
  Rng rng(seed);
  init_ans_model(m, rng);
  return m;
}

std::vector<Neighbor> random_neighbors(Rng& rng, std::size_t n, std::size_t n_labels) {
  std::vector<Neighbor> out;
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d += rng.uniform(0.0, 0.5);
    out.push_back(nb(d, rng.below(n_labels), i));
  }
  return out;
}

TEST(AnsChoices, MultiplesOfFour) {
  EXPECT_EQ(ans_choices(16), (std::vector<std::size_t>{0, 4, 8, 12, 16}));
  EXPECT_EQ(ans_choices(4), (std::vector<std::size_t>{0, 4}));
  EXPECT_THROW(ans_choices(6), Error);
}

TEST(AnsModelShapes, Tensors) {
  const auto m = make_ans_model(16, 32);
  EXPECT_EQ(m.params.tensor_info("w1").shape, (std::vector<std::size_t>{32, 32}));
  EXPECT_EQ(m.params.tensor_info("w2").shape, (std::vector<std::size_t>{5, 32}));
  EXPECT_EQ(m.params.size(), 32u * 32 + 32 + 5 * 32 + 5);
}

TEST(AnsForward, ZeroNetworkIsUniform) {
  const auto m = make_ans_model(16, 32);
  const std::vector<double> d(16, 1.0), c(16, 2.0);
  const auto p = ans_forward(m, d, c);
  ASSERT_EQ(p.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(p[i], 0.2, 1e-15);
}

TEST(AnsForward, DominantBias) {
  auto m = make_ans_model(16, 32);
  m.params.tensor("b2")[0] = 10.0;
  const std::vector<double> d(16, 1.0), c(16, 1.0);
  const auto p = ans_forward(m, d, c);
  EXPECT_GT(p[0], 0.998);
  EXPECT_NEAR(p[0], std::exp(10.0) / (std::exp(10.0) + 4.0), 1e-12);
}

TEST(AnsForward, MatchesOracle) {
  Rng rng(77);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = random_model(s);
    std::vector<double> d(16), c(16);
    for (double& x : d) x = rng.uniform(0.0, 3.0);
    for (double& x : c) x = static_cast<double>(1 + rng.below(2));
    std::vector<double> x = d;
    x.insert(x.end(), c.begin(), c.end());
    const auto ref = oracle_forward(m, x);
    const auto p = ans_forward(m, d, c);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(p[i], ref[i], 1e-12);
  }
}

TEST(AnsForward, LengthMismatch) {
  const auto m = make_ans_model(8, 4);
  const std::vector<double> d(7, 0.0), c(8, 0.0);
  EXPECT_THROW(ans_forward(m, d, c), Error);
}

TEST(AnsForward, ContinuousInInputs) {
  const auto m = random_model(5);
  Rng rng(6);
  std::vector<double> d(16), c(16, 1.0);
  for (double& x : d) x = rng.uniform(0.0, 2.0);
  const auto base = ans_forward(m, d, c);
  for (double eps : {1e-3, 1e-5, 1e-7}) {
    auto dp = d;
    for (double& x : dp) x += eps;
    const auto p = ans_forward(m, dp, c);
    double diff = 0.0;
    for (std::size_t i = 0; i < 5; ++i) diff = std::max(diff, std::abs(p[i] - base[i]));
    EXPECT_LT(diff, 100.0 * eps);
  }
}

TEST(AnsAggregate, GateOnZeroReturnsPlm) {
  auto m = make_ans_model(4, 4);
  m.params.tensor("b2")[0] = 1000.0;
  const Distribution p_lm({0.3, 0.7});
  const std::vector<Neighbor> n = {nb(0.1, 0), nb(0.2, 0), nb(0.3, 0), nb(0.4, 0)};
  EXPECT_EQ(ans_aggregate(m, p_lm, n, 5.0), p_lm);
}

TEST(AnsAggregate, UnanimousWithoutPlmMass) {
  auto m = make_ans_model(16, 4);
  m.params.tensor("b2")[0] = -1000.0;
  Rng rng(1);
  std::vector<Neighbor> n;
  for (std::size_t i = 0; i < 16; ++i) n.push_back(nb(0.1 * double(i), 1, i));
  const auto p = ans_aggregate(m, Distribution({0.9, 0.1}), n, 5.0);
  EXPECT_NEAR(p[1], 1.0, 1e-15);
  EXPECT_NEAR(p[0], 0.0, 1e-15);
}

TEST(AnsAggregate, ConvexCombinationExample) {
  // k_max = 4: choices {0, 4}; zero network gives (0.5, 0.5).
  const auto m = make_ans_model(4, 4);
  const double tau = 5.0;
  const double d = std::sqrt(tau * std::log(3.0));  // weight 1/3 against three weights of 1
  const std::vector<Neighbor> n = {nb(0.0, 0), nb(0.0, 0), nb(0.0, 0), nb(d, 1)};
  const auto knn = knn_distribution(n, tau, 2);
  ASSERT_NEAR(knn[0], 0.9, 1e-12);
  const auto p = ans_aggregate(m, Distribution({0.2, 0.8}), n, tau);
  EXPECT_NEAR(p[0], 0.55, 1e-12);
  EXPECT_NEAR(p[1], 0.45, 1e-12);
}

TEST(AnsAggregate, EqualCandidatesGiveThatCandidate) {
  // All neighbors share distance; every prefix yields the same frequencies.
  const auto m = random_model(3, 8, 8);
  std::vector<Neighbor> n;
  for (std::size_t i = 0; i < 8; ++i) n.push_back(nb(1.0, i % 2, i));
  const auto p = ans_aggregate(m, Distribution({0.5, 0.5}), n, 5.0);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(AnsAggregate, AlwaysValidDistribution) {
  Rng rng(8);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto m = random_model(s);
    const auto n = random_neighbors(rng, 16, 3);
    const auto p = ans_aggregate(m, softmax(std::vector<double>{rng.normal(), rng.normal(), rng.normal()}), n, 5.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sum += p[i];
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  const auto m = random_model(0);
  EXPECT_THROW(ans_aggregate(m, Distribution({0.5, 0.5}), {}, 5.0), Error);
}

TEST(AnsRows, GoldProbabilitiesPerChoice) {
  const std::vector<Neighbor> n = {nb(0.0, 1), nb(0.5, 0), nb(0.6, 0), nb(0.7, 0)};
  const auto row = make_ans_row(n, Distribution({0.25, 0.75}), 1, 8, 5.0);
  ASSERT_EQ(row.gold_probs.size(), 3u);
  EXPECT_EQ(row.gold_probs[0], 0.75);
  EXPECT_EQ(row.gold_probs[1], knn_distribution(n, 5.0, 2)[1]);
  EXPECT_EQ(row.gold_probs[2], row.gold_probs[1]);  // pool smaller than 8
  EXPECT_EQ(row.features.size(), 16u);
}

std::vector<AnsRow> random_rows(std::uint64_t seed, std::size_t n_rows) {
  Rng rng(seed);
  std::vector<AnsRow> rows;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto n = random_neighbors(rng, 16, 2);
    const auto p_lm = softmax(std::vector<double>{rng.normal(), rng.normal()});
    rows.push_back(make_ans_row(n, p_lm, rng.below(2), 16, 5.0));
  }
  return rows;
}

TEST(AnsLoss, GradientMatchesFiniteDifferences) {
  const auto rows = random_rows(9, 12);
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = random_model(100 + s);
    std::vector<double> grad(m.params.size(), 0.0);
    ans_loss(m, m.params.values(), rows, idx, grad);
    const double err = finite_diff_check(
        [&](std::span<const double> p) { return ans_loss(m, p, rows, idx, {}); }, m.params.values(), grad);
    EXPECT_LT(err, 1e-4) << "seed " << s;
  }
}

TEST(AnsLoss, StandardizedGradient) {
  const auto rows = random_rows(10, 8);
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto m = random_model(7);
  m.feature_mean.assign(32, 0.5);
  m.feature_scale.assign(32, 2.0);
  std::vector<double> grad(m.params.size(), 0.0);
  ans_loss(m, m.params.values(), rows, idx, grad);
  const double err = finite_diff_check([&](std::span<const double> p) { return ans_loss(m, p, rows, idx, {}); },
                                       m.params.values(), grad);
  EXPECT_LT(err, 1e-4);
}

Dataset ans_dataset(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.dim = 8;
  cfg.n_test = 10;
  cfg.readout_rotation = 1.0;
  cfg.seed = seed;
  return generate(cfg);
}

TEST(TrainAns, LossDecreasesAndIsDeterministic) {
  const auto ds = ans_dataset(1);
  const auto halves = stratified_half_split(ds, 3);
  const auto store = build_datastore(halves.b, ds.dim, 2);
  Hyperparams hp;
  hp.epochs = 10;
  const auto a = train_ans(halves.a, store, hp);
  const auto b = train_ans(halves.a, store, hp);
  EXPECT_LT(a.curve.epoch_losses.back(), a.curve.initial_loss);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.curve.epoch_losses, b.curve.epoch_losses);
  hp.seed = 1;
  EXPECT_NE(train_ans(halves.a, store, hp).model, a.model);
}

TEST(TrainAns, RejectsOverlap) {
  const auto ds = ans_dataset(2);
  const auto train = ds.split(Split::kTrain);
  const auto store = build_datastore(train, ds.dim, 2);
  try {
    train_ans(train, store, Hyperparams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOverlap);
  }
  EXPECT_THROW(train_ans({}, store, Hyperparams{}), Error);
}

}  // namespace
}  // namespace knnc
