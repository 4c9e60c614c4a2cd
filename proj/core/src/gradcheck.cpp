#include "knnc/gradcheck.hpp"

#include <algorithm>
#include <numeric>

#include "knnc/ans.hpp"
#include "knnc/fr.hpp"
#include "knnc/optim.hpp"
#include "knnc/rng.hpp"

namespace knnc {

namespace {

constexpr std::size_t kAnsRows = 16;
constexpr std::size_t kFrInputDim = 8;
constexpr std::size_t kFrStore = 40;
constexpr std::size_t kFrQueries = 8;
constexpr std::size_t kLabels = 2;
constexpr FiniteDiffOptions kProbe{.step = 1e-5, .retry_step = 1e-7};

std::vector<LabeledPoint> random_points(Rng& rng, std::size_t n) {
  std::vector<LabeledPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(kFrInputDim);
    for (double& x : e) x = rng.normal();
    pts.push_back({Embedding(std::move(e)), static_cast<std::size_t>(rng.below(kLabels))});
  }
  return pts;
}

double ans_error(const Hyperparams& hp, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 1));
  std::vector<AnsRow> rows;
  for (std::size_t r = 0; r < kAnsRows; ++r) {
    NeighborList neighbors;
    double d = 0.0;
    for (std::size_t i = 0; i < hp.k_max; ++i) {
      d += rng.uniform(0.0, 0.5);
      neighbors.push_back({d, static_cast<std::size_t>(rng.below(kLabels)), i});
    }
    const Distribution p_lm = softmax(std::vector<double>{rng.normal(), rng.normal()});
    rows.push_back(make_ans_row(neighbors, p_lm, rng.below(kLabels), hp.k_max, hp.tau));
  }
  AnsModel model = make_ans_model(hp.k_max, hp.ans_hidden);
  init_ans_model(model, rng);

  std::vector<std::size_t> all(rows.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> grad(model.params.size(), 0.0);
  ans_loss(model, model.params.values(), rows, all, grad);
  return finite_diff_check([&](std::span<const double> p) { return ans_loss(model, p, rows, all, {}); },
                           model.params.values(), grad, kProbe);
}

double fr_error(const Hyperparams& hp, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 2));
  const auto store = random_points(rng, kFrStore);
  const auto queries = random_points(rng, kFrQueries);
  FrModel model(kFrInputDim, hp.z_dim);
  init_fr_model(model, rng);

  std::vector<std::size_t> all(queries.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  FrSelections selection;
  std::vector<double> grad(model.params().size(), 0.0);
  fr_batch_loss(model, model.params().values(), queries, all, store, {hp.k, hp.tau, nullptr, &selection}, grad);
  const FrBatchOptions fixed{hp.k, hp.tau, &selection, nullptr};
  return finite_diff_check(
      [&](std::span<const double> p) { return fr_batch_loss(model, p, queries, all, store, fixed, {}); },
      model.params().values(), grad, kProbe);
}

}  // namespace

double GradientCheckResult::max_ans() const {
  return ans_errors.empty() ? 0.0 : *std::max_element(ans_errors.begin(), ans_errors.end());
}

double GradientCheckResult::max_fr() const {
  return fr_errors.empty() ? 0.0 : *std::max_element(fr_errors.begin(), fr_errors.end());
}

GradientCheckResult run_gradient_checks(const Hyperparams& hp, std::size_t inits, std::uint64_t seed) {
  hp.validate();
  GradientCheckResult result;
  for (std::size_t i = 0; i < inits; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    result.ans_errors.push_back(ans_error(hp, s));
    result.fr_errors.push_back(fr_error(hp, s));
  }
  return result;
}

}  // namespace knnc
