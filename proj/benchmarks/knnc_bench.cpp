#include <algorithm>
#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>

#include <knnc/knnc.hpp>

namespace {

using namespace knnc;

Dataset bench_dataset(std::size_t dim, std::size_t k_shots) {
  SynthConfig cfg = biased_plm_preset();
  cfg.dim = dim;
  cfg.k_shots = k_shots;
  cfg.n_test = 32;
  return generate(cfg);
}

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Exhaustive search; store size K * K * |Y|.
void BM_Search(benchmark::State& state) {
  const auto k_shots = static_cast<std::size_t>(state.range(0));
  const Dataset ds = bench_dataset(64, k_shots);
  const Datastore store = build_datastore(ds, in_split(Split::kTrain));
  Rng rng(1);
  const auto query = random_vector(rng, ds.dim);
  for (auto _ : state) benchmark::DoNotOptimize(search(store, query, 16));
  state.counters["records"] = static_cast<double>(store.size());
}
BENCHMARK(BM_Search)->Arg(8)->Arg(16)->Arg(32);

void BM_KnnDistribution(benchmark::State& state) {
  NeighborList neighbors;
  Rng rng(2);
  for (std::size_t i = 0; i < 16; ++i) neighbors.push_back({rng.uniform(0.0, 3.0), rng.below(2), i});
  std::sort(neighbors.begin(), neighbors.end(), [](const auto& a, const auto& b) { return a.distance < b.distance; });
  for (auto _ : state) benchmark::DoNotOptimize(knn_distribution(neighbors, 5.0, 2));
}
BENCHMARK(BM_KnnDistribution);

void BM_AnsForward(benchmark::State& state) {
  AnsModel model = make_ans_model(16, 32);
  Rng rng(3);
  init_ans_model(model, rng);
  const auto d = random_vector(rng, 16);
  const auto c = random_vector(rng, 16);
  for (auto _ : state) benchmark::DoNotOptimize(ans_forward(model, d, c));
}
BENCHMARK(BM_AnsForward);

void BM_FrTransform(benchmark::State& state) {
  const auto in_dim = static_cast<std::size_t>(state.range(0));
  FrModel model(in_dim, 32);
  Rng rng(4);
  init_fr_model(model, rng);
  const Embedding h(random_vector(rng, in_dim));
  for (auto _ : state) benchmark::DoNotOptimize(model.apply(h));
}
BENCHMARK(BM_FrTransform)->Arg(64)->Arg(1024);

// One test instance (K variants) end to end.
void BM_PredictInstance(benchmark::State& state) {
  const auto mode = static_cast<PredictMode>(state.range(0));
  const Dataset ds = bench_dataset(64, 16);
  const Datastore store = build_datastore(ds, in_split(Split::kTrain));
  const Hyperparams hp;
  AnsModel ans = make_ans_model(hp.k_max, hp.ans_hidden);
  Rng rng(5);
  init_ans_model(ans, rng);
  const Instance inst = ds.split(Split::kTest).front();
  const PredictContext ctx{mode, nullptr, &ans};
  for (auto _ : state) benchmark::DoNotOptimize(predict_instance(inst, store, hp, ctx));
}
BENCHMARK(BM_PredictInstance)
    ->Arg(static_cast<int>(PredictMode::kIcl))
    ->Arg(static_cast<int>(PredictMode::kFixedLambda))
    ->Arg(static_cast<int>(PredictMode::kAnsAggregated));

// Loss and gradient over one minibatch of FR queries against a half store.
void BM_FrBatchGradient(benchmark::State& state) {
  const Dataset ds = bench_dataset(64, 16);
  const HalfSplit halves = stratified_half_split(ds, 1);
  const auto queries = labeled_points(halves.b);
  const auto store = labeled_points(halves.a);
  FrModel model(ds.dim, 32);
  Rng rng(6);
  init_fr_model(model, rng);
  std::vector<std::size_t> batch(64);
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  std::vector<double> grad(model.params().size());
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    benchmark::DoNotOptimize(fr_batch_loss(model, model.params().values(), queries, batch, store, {}, grad));
  }
}
BENCHMARK(BM_FrBatchGradient);

}  // namespace

BENCHMARK_MAIN();
