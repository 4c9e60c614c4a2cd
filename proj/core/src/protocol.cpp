#include "knnc/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "knnc/error.hpp"
#include "knnc/rng.hpp"

namespace knnc {

namespace {

struct MethodName {
  MethodMode mode;
  std::string_view label;
  std::string_view token;
};

constexpr MethodName kMethodNames[] = {
    {MethodMode::kIcl, "ICL", "icl"},
    {MethodMode::kKnnC, "KNN-C", "knn-c"},
    {MethodMode::kMinusAns, "-ANS", "minus-ans"},
    {MethodMode::kMinusFr, "-FR", "minus-fr"},
    {MethodMode::kMinusAnsFr, "-ANS,FR", "minus-ans-fr"},
    {MethodMode::kKnnOnly, "-ANS,FR,p_L", "knn-only"},
};

constexpr std::uint64_t kSplitStream = 0x5b1;

void assert_disjoint(std::span<const Instance> queries, const Datastore& store, const char* stage) {
  for (const auto& q : queries) {
    if (store.contains_instance(q.id)) {
      fail(ErrorCode::kOverlap, std::string(stage) + ": query '" + q.id + "' is in its own training datastore");
    }
  }
}

}  // namespace

std::string_view method_label(MethodMode mode) {
  for (const auto& m : kMethodNames) {
    if (m.mode == mode) return m.label;
  }
  return "?";
}

std::string_view method_token(MethodMode mode) {
  for (const auto& m : kMethodNames) {
    if (m.mode == mode) return m.token;
  }
  return "?";
}

MethodMode parse_method(std::string_view text) {
  for (const auto& m : kMethodNames) {
    if (text == m.token || text == m.label) return m.mode;
  }
  fail(ErrorCode::kInvalidConfig, "unknown method '" + std::string(text) + "'");
}

HalfSplit stratified_half_split(std::span<const Instance> train, std::size_t n_labels, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(n_labels);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!train[i].label) fail(ErrorCode::kMissingLabel, "train instance '" + train[i].id + "' has no label");
    if (*train[i].label >= n_labels) fail(ErrorCode::kInvalidInput, "label index out of range");
    by_class[*train[i].label].push_back(i);
  }
  Rng rng(seed);
  std::vector<bool> in_a(train.size(), false);
  for (std::size_t c = 0; c < n_labels; ++c) {
    auto& members = by_class[c];
    if (members.size() % 2 != 0) {
      fail(ErrorCode::kSplit, "class " + std::to_string(c) + " has an odd number (" + std::to_string(members.size()) +
                                  ") of train instances");
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t j = 0; j < members.size() / 2; ++j) in_a[members[j]] = true;
  }
  HalfSplit split;
  for (std::size_t i = 0; i < train.size(); ++i) (in_a[i] ? split.a : split.b).push_back(train[i]);
  return split;
}

HalfSplit stratified_half_split(const Dataset& dataset, std::uint64_t seed) {
  const auto train = dataset.split(Split::kTrain);
  return stratified_half_split(train, dataset.label_space.size(), seed);
}

TunedParams tune_lambda(std::span<const Instance> dev, const Datastore& store, const Hyperparams& hp,
                        const TuningGrid& grid, const EmbeddingTransform* transform) {
  if (dev.empty()) fail(ErrorCode::kInvalidInput, "empty dev split");
  if (grid.lambdas.empty()) fail(ErrorCode::kInvalidConfig, "empty lambda grid");
  const std::vector<double> taus = grid.taus.empty() ? std::vector<double>{hp.tau} : grid.taus;
  const std::vector<std::size_t> ks = grid.ks.empty() ? std::vector<std::size_t>{hp.k} : grid.ks;
  const std::size_t depth = *std::max_element(ks.begin(), ks.end());

  struct VariantCache {
    Distribution p_lm;
    NeighborList neighbors;
  };
  std::vector<std::vector<VariantCache>> cache;
  cache.reserve(dev.size());
  for (const auto& inst : dev) {
    if (!inst.label) fail(ErrorCode::kMissingLabel, "dev instance '" + inst.id + "' has no label");
    std::vector<VariantCache> variants;
    for (const auto& v : inst.variants) {
      const Embedding query = transform ? transform->apply(v.embedding) : v.embedding;
      variants.push_back({softmax(v.plm_logits), search(store, query.values(), depth)});
    }
    cache.push_back(std::move(variants));
  }

  const std::size_t n_labels = dev.front().variants.front().plm_logits.size();
  TunedParams best;
  bool have_best = false;
  for (double tau : taus) {
    for (std::size_t k : ks) {
      // p_knn per variant for this (tau, k).
      std::vector<std::vector<Distribution>> knn(dev.size());
      for (std::size_t i = 0; i < dev.size(); ++i) {
        for (const auto& vc : cache[i]) {
          const std::size_t take = std::min(k, vc.neighbors.size());
          knn[i].push_back(knn_distribution(std::span<const Neighbor>(vc.neighbors).first(take), tau, n_labels));
        }
      }
      for (double lambda : grid.lambdas) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < dev.size(); ++i) {
          std::vector<Distribution> parts;
          for (std::size_t v = 0; v < cache[i].size(); ++v) parts.push_back(interpolate(knn[i][v], cache[i][v].p_lm, lambda));
          correct += ensemble(parts, hp.ensemble).argmax() == *dev[i].label;
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(dev.size());
        if (!have_best || acc > best.dev_accuracy) {
          best = {lambda, tau, k, acc};
          have_best = true;
        }
      }
    }
  }
  return best;
}

RunStats aggregate_runs(std::span<const double> accuracies) {
  if (accuracies.empty()) fail(ErrorCode::kInvalidInput, "no runs to aggregate");
  const double n = static_cast<double>(accuracies.size());
  RunStats stats;
  stats.worst = *std::min_element(accuracies.begin(), accuracies.end());
  // Averaging offsets from the minimum keeps avg >= worst under rounding
  // (a plain sum of three 0.7s divides back to 0.6999999999999998).
  double excess = 0.0;
  for (double a : accuracies) excess += a - stats.worst;
  stats.avg = stats.worst + excess / n;
  if (accuracies.size() > 1) {
    double ss = 0.0;
    for (double a : accuracies) ss += (a - stats.avg) * (a - stats.avg);
    stats.std_dev = std::sqrt(ss / (n - 1.0));
  }
  return stats;
}

double accuracy(std::span<const Instance> instances, const Datastore& store, const Hyperparams& hp,
                const PredictContext& context) {
  std::size_t correct = 0, total = 0;
  for (const auto& inst : instances) {
    if (!inst.label) continue;
    correct += predict_instance(inst, store, hp, context).final.argmax() == *inst.label;
    ++total;
  }
  if (total == 0) fail(ErrorCode::kInvalidInput, "no labeled instances to score");
  return static_cast<double>(correct) / static_cast<double>(total);
}

PipelineResult run_pipeline(const Dataset& dataset, const Hyperparams& hp, MethodMode mode,
                            const PipelineOptions& options) {
  hp.validate();
  const std::size_t n_labels = dataset.label_space.size();
  const std::vector<Instance> train = dataset.split(Split::kTrain);
  const std::vector<Instance> dev = dataset.split(Split::kDev);
  const std::vector<Instance> test = dataset.split(Split::kTest);

  PipelineResult result;
  result.mode = mode;

  const bool uses_fr = mode == MethodMode::kKnnC || mode == MethodMode::kMinusAns;
  const bool uses_ans = mode == MethodMode::kKnnC || mode == MethodMode::kMinusFr;

  std::optional<HalfSplit> halves;
  if ((uses_fr && !options.fr) || (uses_ans && !options.ans)) {
    halves = stratified_half_split(train, n_labels, derive_seed(hp.seed, kSplitStream));
  }

  const FrModel* fr = nullptr;
  if (uses_fr) {
    if (options.fr) {
      fr = options.fr;
    } else {
      FrTrainResult trained = train_fr(halves->b, halves->a, hp);
      result.fr = std::move(trained.model);
      result.fr_curve = std::move(trained.curve);
      fr = &*result.fr;
    }
  }

  const AnsModel* ans = nullptr;
  if (uses_ans) {
    if (options.ans) {
      ans = options.ans;
    } else {
      const Datastore ans_store = build_datastore(halves->b, dataset.dim, n_labels, fr);
      assert_disjoint(halves->a, ans_store, "ANS training");
      AnsTrainResult trained = train_ans(halves->a, ans_store, hp, fr);
      result.ans = std::move(trained.model);
      result.ans_curve = std::move(trained.curve);
      ans = &*result.ans;
    }
  }

  const Datastore store = build_datastore(train, dataset.dim, n_labels, fr);
  Hyperparams eval_hp = hp;
  PredictContext context;
  context.transform = fr;
  context.ans = ans;

  switch (mode) {
    case MethodMode::kIcl:
      context.mode = PredictMode::kIcl;
      break;
    case MethodMode::kKnnC:
    case MethodMode::kMinusFr:
      context.mode = PredictMode::kAnsAggregated;
      result.tau = hp.tau;
      result.k = hp.k_max;
      break;
    case MethodMode::kMinusAns:
    case MethodMode::kMinusAnsFr: {
      const TunedParams tuned = tune_lambda(dev, store, hp, options.grid, fr);
      eval_hp.lambda = tuned.lambda;
      eval_hp.tau = tuned.tau;
      eval_hp.k = tuned.k;
      context.mode = PredictMode::kFixedLambda;
      result.lambda = tuned.lambda;
      result.tau = tuned.tau;
      result.k = tuned.k;
      break;
    }
    case MethodMode::kKnnOnly:
      context.mode = PredictMode::kKnnOnly;
      result.lambda = 0.0;
      result.tau = hp.tau;
      result.k = hp.k;
      break;
  }

  std::size_t correct = 0, total = 0;
  for (const auto& inst : test) {
    const std::size_t predicted = predict_instance(inst, store, eval_hp, context).final.argmax();
    result.predictions.push_back(predicted);
    if (inst.label) {
      correct += predicted == *inst.label;
      ++total;
    }
  }
  if (total == 0) fail(ErrorCode::kInvalidInput, "no labeled test instances");
  result.test_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return result;
}

RunReport evaluate_methods(const Dataset& dataset, const Hyperparams& hp, std::span<const MethodMode> modes,
                           const EvaluationOptions& options) {
  if (options.runs == 0) fail(ErrorCode::kInvalidConfig, "need at least one run");
  if (modes.empty()) fail(ErrorCode::kInvalidConfig, "no methods to evaluate");

  const std::size_t n_jobs = modes.size() * options.runs;
  std::vector<std::optional<PipelineResult>> results(n_jobs);
  std::vector<std::exception_ptr> errors(n_jobs);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (std::size_t job = next++; job < n_jobs; job = next++) {
      const std::size_t m = job / options.runs;
      const std::size_t r = job % options.runs;
      Hyperparams run_hp = hp;
      run_hp.seed = derive_seed(hp.seed, r);
      try {
        results[job] = run_pipeline(dataset, run_hp, modes[m], options.pipeline);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };

  std::size_t n_workers = options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, n_jobs);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RunReport report;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    MethodReport row;
    row.mode = modes[m];
    for (std::size_t r = 0; r < options.runs; ++r) {
      const PipelineResult& res = *results[m * options.runs + r];
      row.accuracies.push_back(res.test_accuracy);
      row.lambdas.push_back(res.lambda);
      row.taus.push_back(res.tau);
      row.ks.push_back(res.k);
    }
    row.stats = aggregate_runs(row.accuracies);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace knnc
