#include "knnc/fr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "knnc/error.hpp"
#include "knnc/rng.hpp"

namespace knnc {

namespace {

constexpr std::uint64_t kInitStream = 0xf01;
constexpr std::uint64_t kShuffleStream = 0xf02;

struct Projected {
  std::vector<double> pre;  // W h + b
  std::vector<double> out;  // ReLU(pre)
};

void project(std::span<const double> params, std::size_t in_dim, std::size_t z_dim, std::span<const double> h,
             Projected& result) {
  const double* w = params.data();
  const double* b = params.data() + z_dim * in_dim;
  result.pre.resize(z_dim);
  result.out.resize(z_dim);
  for (std::size_t z = 0; z < z_dim; ++z) {
    double acc = b[z];
    const double* row = w + z * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * h[i];
    result.pre[z] = acc;
    result.out[z] = acc > 0.0 ? acc : 0.0;
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

// Accumulates upstream gradient g (w.r.t. the ReLU output) into dW, db.
void backprop_point(std::span<const double> g, const Projected& p, std::span<const double> h, std::size_t in_dim,
                    std::size_t z_dim, std::span<double> grad) {
  double* g_w = grad.data();
  double* g_b = grad.data() + z_dim * in_dim;
  for (std::size_t z = 0; z < z_dim; ++z) {
    if (p.pre[z] <= 0.0 || g[z] == 0.0) continue;
    g_b[z] += g[z];
    double* row = g_w + z * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) row[i] += g[z] * h[i];
  }
}

}  // namespace

FrModel::FrModel(std::size_t input_dim, std::size_t z_dim) : input_dim_(input_dim), z_dim_(z_dim) {
  if (input_dim == 0 || z_dim == 0) fail(ErrorCode::kInvalidConfig, "FR dimensions must be positive");
  params_.add_tensor("w_f", {z_dim, input_dim});
  params_.add_tensor("b_f", {z_dim});
}

Embedding FrModel::apply(const Embedding& input) const {
  if (input.size() != input_dim_) {
    fail(ErrorCode::kDimensionMismatch, "FR expects dimension " + std::to_string(input_dim_) + ", got " +
                                            std::to_string(input.size()));
  }
  Projected p;
  project(params_.values(), input_dim_, z_dim_, input.values(), p);
  return Embedding(std::move(p.out));
}

void init_fr_model(FrModel& model, Rng& rng) {
  init_uniform_fan_in(model.params(), "w_f", model.input_dim(), rng);
  init_uniform_fan_in(model.params(), "b_f", model.input_dim(), rng);
}

Embedding fr_transform(const FrModel& model, const Embedding& h) { return model.apply(h); }

double fr_loss(const FrModel& model, const LabeledPoint& query, std::span<const LabeledPoint> store, std::size_t k,
               double tau) {
  if (store.empty()) fail(ErrorCode::kInvalidInput, "FR loss needs a non-empty store");
  const std::size_t index = 0;
  return fr_batch_loss(model, model.params().values(), std::span<const LabeledPoint>(&query, 1),
                       std::span<const std::size_t>(&index, 1), store, FrBatchOptions{k, tau, nullptr, nullptr}, {});
}

double fr_batch_loss(const FrModel& model, std::span<const double> params, std::span<const LabeledPoint> queries,
                     std::span<const std::size_t> indices, std::span<const LabeledPoint> store,
                     const FrBatchOptions& options, std::span<double> grad) {
  if (store.empty()) fail(ErrorCode::kInvalidInput, "FR loss needs a non-empty store");
  if (indices.empty()) fail(ErrorCode::kInvalidInput, "empty FR batch");
  if (options.k == 0) fail(ErrorCode::kInvalidInput, "k must be positive");
  if (!(options.tau > 0.0)) fail(ErrorCode::kInvalidInput, "tau must be positive");
  if (params.size() != model.params().size()) fail(ErrorCode::kDimensionMismatch, "FR parameter length mismatch");
  if (!grad.empty() && grad.size() != params.size()) fail(ErrorCode::kDimensionMismatch, "FR gradient length mismatch");
  if (options.fixed_selection && options.fixed_selection->size() != indices.size()) {
    fail(ErrorCode::kDimensionMismatch, "fixed selection does not match the batch");
  }

  const std::size_t in_dim = model.input_dim();
  const std::size_t z_dim = model.output_dim();
  const std::size_t take = std::min(options.k, store.size());

  std::vector<Projected> keys(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (store[i].embedding.size() != in_dim) fail(ErrorCode::kDimensionMismatch, "FR store point dimension mismatch");
    project(params, in_dim, z_dim, store[i].embedding.values(), keys[i]);
  }
  // Upstream gradient w.r.t. each projected store key, summed over the batch.
  std::vector<std::vector<double>> key_grads;
  if (!grad.empty()) key_grads.assign(store.size(), std::vector<double>());

  if (options.selection_out) options.selection_out->clear();

  const double scale = 1.0 / static_cast<double>(indices.size());
  Projected q;
  std::vector<double> sq(store.size());
  std::vector<std::size_t> order(store.size());
  std::vector<double> q_grad(z_dim);
  double total = 0.0;

  for (std::size_t b = 0; b < indices.size(); ++b) {
    const LabeledPoint& query = queries[indices[b]];
    if (query.embedding.size() != in_dim) fail(ErrorCode::kDimensionMismatch, "FR query dimension mismatch");
    project(params, in_dim, z_dim, query.embedding.values(), q);
    for (std::size_t i = 0; i < store.size(); ++i) sq[i] = squared_distance(q.out, keys[i].out);

    std::vector<std::size_t> selected;
    if (options.fixed_selection) {
      selected = (*options.fixed_selection)[b];
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                        [&](std::size_t a, std::size_t c) { return sq[a] < sq[c] || (sq[a] == sq[c] && a < c); });
      selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    }
    if (selected.empty()) fail(ErrorCode::kInvalidInput, "empty neighbor selection");

    double nearest = sq[selected.front()];
    for (std::size_t i : selected) nearest = std::min(nearest, sq[i]);
    double gold_mass = 0.0, total_mass = 0.0;
    std::vector<double> weights(selected.size());
    for (std::size_t j = 0; j < selected.size(); ++j) {
      weights[j] = std::exp(-(sq[selected[j]] - nearest) / options.tau);
      total_mass += weights[j];
      if (store[selected[j]].label == query.label) gold_mass += weights[j];
    }
    const double p_gold = gold_mass / total_mass;
    total += -std::log(std::max(p_gold, kProbabilityFloor));

    if (!grad.empty() && p_gold > kProbabilityFloor) {
      // dL/ds_j = (w_j / tau) (1[gold] / A - 1 / B), s_j = |u - t_j|^2.
      std::fill(q_grad.begin(), q_grad.end(), 0.0);
      for (std::size_t j = 0; j < selected.size(); ++j) {
        const std::size_t s = selected[j];
        const bool gold = store[s].label == query.label;
        const double d_s = (weights[j] / options.tau) * ((gold ? 1.0 / gold_mass : 0.0) - 1.0 / total_mass) * scale;
        if (d_s == 0.0) continue;
        auto& kg = key_grads[s];
        if (kg.empty()) kg.assign(z_dim, 0.0);
        for (std::size_t z = 0; z < z_dim; ++z) {
          const double diff = 2.0 * (q.out[z] - keys[s].out[z]) * d_s;
          q_grad[z] += diff;
          kg[z] -= diff;
        }
      }
      backprop_point(q_grad, q, query.embedding.values(), in_dim, z_dim, grad);
    }
    if (options.selection_out) options.selection_out->push_back(std::move(selected));
  }

  if (!grad.empty()) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      if (!key_grads[i].empty()) backprop_point(key_grads[i], keys[i], store[i].embedding.values(), in_dim, z_dim, grad);
    }
  }
  return total * scale;
}

std::vector<LabeledPoint> labeled_points(std::span<const Instance> instances) {
  std::vector<LabeledPoint> points;
  for (const auto& inst : instances) {
    if (!inst.label) fail(ErrorCode::kMissingLabel, "instance '" + inst.id + "' has no label");
    for (const auto& v : inst.variants) points.push_back({v.embedding, *inst.label});
  }
  return points;
}

FrTrainResult train_fr(std::span<const Instance> queries, std::span<const Instance> store_instances,
                       const Hyperparams& hp) {
  hp.validate();
  if (queries.empty() || store_instances.empty()) fail(ErrorCode::kInvalidInput, "FR training needs queries and a store");
  std::set<std::string_view> store_ids;
  for (const auto& inst : store_instances) store_ids.insert(inst.id);
  for (const auto& inst : queries) {
    if (store_ids.count(inst.id)) {
      fail(ErrorCode::kOverlap, "FR query '" + inst.id + "' also appears in its training store");
    }
  }

  const std::vector<LabeledPoint> query_points = labeled_points(queries);
  const std::vector<LabeledPoint> store_points = labeled_points(store_instances);
  const std::size_t in_dim = store_points.front().embedding.size();

  FrModel model(in_dim, hp.z_dim);
  Rng init_rng(derive_seed(hp.seed, kInitStream));
  init_fr_model(model, init_rng);

  FrBatchOptions options;
  options.k = hp.fr_objective == FrObjective::kFullStore ? store_points.size() : hp.k;
  options.tau = hp.tau;

  Rng shuffle_rng(derive_seed(hp.seed, kShuffleStream));
  const TrainSchedule schedule{hp.lr, hp.batch_size, hp.epochs};
  TrainingCurve curve =
      train_adam(model.params(), query_points.size(), schedule, shuffle_rng,
                 [&](std::span<const double> params, std::span<const std::size_t> batch, std::span<double> grad) {
                   return fr_batch_loss(model, params, query_points, batch, store_points, options, grad);
                 });
  return {std::move(model), std::move(curve)};
}

}  // namespace knnc
