#include "knnc/ans.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knnc/calibrate.hpp"
#include "knnc/error.hpp"
#include "knnc/rng.hpp"

namespace knnc {

namespace {

constexpr std::uint64_t kInitStream = 0xa45;
constexpr std::uint64_t kShuffleStream = 0xa46;

// Scratch for one forward/backward pass.
struct AnsPass {
  std::vector<double> input;
  std::vector<double> pre_hidden;
  std::vector<double> hidden;
  std::vector<double> gate;  // softmax output
};

void ans_forward_pass(const AnsModel& model, std::span<const double> params, std::span<const double> features,
                      AnsPass& pass) {
  const std::size_t n_in = model.input_dim();
  const std::size_t n_hidden = model.hidden;
  const std::size_t n_out = model.choices.size();
  const auto& manifest = model.params.manifest();
  const double* w1 = params.data() + manifest[0].offset;
  const double* b1 = params.data() + manifest[1].offset;
  const double* w2 = params.data() + manifest[2].offset;
  const double* b2 = params.data() + manifest[3].offset;

  pass.input.assign(features.begin(), features.end());
  if (!model.feature_mean.empty()) {
    for (std::size_t i = 0; i < n_in; ++i) {
      pass.input[i] = (pass.input[i] - model.feature_mean[i]) * model.feature_scale[i];
    }
  }

  pass.pre_hidden.assign(n_hidden, 0.0);
  pass.hidden.assign(n_hidden, 0.0);
  for (std::size_t h = 0; h < n_hidden; ++h) {
    double z = b1[h];
    for (std::size_t i = 0; i < n_in; ++i) z += w1[h * n_in + i] * pass.input[i];
    pass.pre_hidden[h] = z;
    pass.hidden[h] = z > 0.0 ? z : 0.0;
  }

  std::vector<double> logits(n_out);
  for (std::size_t o = 0; o < n_out; ++o) {
    double z = b2[o];
    for (std::size_t h = 0; h < n_hidden; ++h) z += w2[o * n_hidden + h] * pass.hidden[h];
    logits[o] = z;
  }
  const Distribution gate = softmax(logits);
  pass.gate.assign(gate.values().begin(), gate.values().end());
}

void check_features(const AnsModel& model, std::size_t n_features) {
  if (n_features != model.input_dim()) {
    fail(ErrorCode::kDimensionMismatch, "ANS expects " + std::to_string(model.input_dim()) + " features, got " +
                                            std::to_string(n_features));
  }
}

}  // namespace

std::vector<std::size_t> ans_choices(std::size_t k_max) {
  if (k_max == 0 || k_max % 4 != 0) fail(ErrorCode::kInvalidConfig, "k_max must be a positive multiple of 4");
  std::vector<std::size_t> choices{0};
  for (std::size_t k = 4; k <= k_max; k += 4) choices.push_back(k);
  return choices;
}

AnsModel make_ans_model(std::size_t k_max, std::size_t hidden) {
  if (hidden == 0) fail(ErrorCode::kInvalidConfig, "ANS hidden size must be positive");
  AnsModel model;
  model.k_max = k_max;
  model.hidden = hidden;
  model.choices = ans_choices(k_max);
  model.params.add_tensor("w1", {hidden, 2 * k_max});
  model.params.add_tensor("b1", {hidden});
  model.params.add_tensor("w2", {model.choices.size(), hidden});
  model.params.add_tensor("b2", {model.choices.size()});
  return model;
}

void init_ans_model(AnsModel& model, Rng& rng) {
  init_uniform_fan_in(model.params, "w1", model.input_dim(), rng);
  init_uniform_fan_in(model.params, "b1", model.input_dim(), rng);
  init_uniform_fan_in(model.params, "w2", model.hidden, rng);
  init_uniform_fan_in(model.params, "b2", model.hidden, rng);
}

Distribution ans_forward(const AnsModel& model, std::span<const double> distances, std::span<const double> counts) {
  if (distances.size() != model.k_max || counts.size() != model.k_max) {
    fail(ErrorCode::kDimensionMismatch, "ANS features must both have length k_max = " + std::to_string(model.k_max));
  }
  std::vector<double> features(distances.begin(), distances.end());
  features.insert(features.end(), counts.begin(), counts.end());
  AnsPass pass;
  ans_forward_pass(model, model.params.values(), features, pass);
  return Distribution(std::move(pass.gate));
}

Distribution ans_aggregate(const AnsModel& model, const Distribution& p_lm, std::span<const Neighbor> neighbors,
                           double tau) {
  if (neighbors.empty()) fail(ErrorCode::kInvalidInput, "ANS aggregation needs at least one neighbor");
  const NeighborFeatures features = distinct_count_features(neighbors, model.k_max);
  const Distribution gate = ans_forward(model, features.distances, features.counts);

  const std::size_t n_labels = p_lm.size();
  std::vector<double> out(n_labels, 0.0);
  for (std::size_t j = 0; j < model.choices.size(); ++j) {
    const std::size_t k = model.choices[j];
    if (k == 0) {
      for (std::size_t y = 0; y < n_labels; ++y) out[y] += gate[j] * p_lm[y];
      continue;
    }
    const std::size_t take = std::min(k, neighbors.size());
    const Distribution p_knn = knn_distribution(neighbors.first(take), tau, n_labels);
    for (std::size_t y = 0; y < n_labels; ++y) out[y] += gate[j] * p_knn[y];
  }
  return Distribution(std::move(out));
}

AnsRow make_ans_row(std::span<const Neighbor> neighbors, const Distribution& p_lm, std::size_t gold,
                    std::size_t k_max, double tau) {
  if (neighbors.empty()) fail(ErrorCode::kInvalidInput, "ANS row needs at least one neighbor");
  if (gold >= p_lm.size()) fail(ErrorCode::kInvalidInput, "gold label out of range");
  AnsRow row;
  const NeighborFeatures features = distinct_count_features(neighbors, k_max);
  row.features = features.distances;
  row.features.insert(row.features.end(), features.counts.begin(), features.counts.end());
  for (std::size_t k : ans_choices(k_max)) {
    if (k == 0) {
      row.gold_probs.push_back(p_lm[gold]);
    } else {
      const std::size_t take = std::min(k, neighbors.size());
      row.gold_probs.push_back(knn_distribution(neighbors.first(take), tau, p_lm.size())[gold]);
    }
  }
  return row;
}

std::vector<AnsRow> make_ans_rows(std::span<const Instance> queries, const Datastore& store, const Hyperparams& hp,
                                  const EmbeddingTransform* transform) {
  std::vector<AnsRow> rows;
  for (const auto& inst : queries) {
    if (!inst.label) fail(ErrorCode::kMissingLabel, "ANS query '" + inst.id + "' has no label");
    if (store.contains_instance(inst.id)) {
      fail(ErrorCode::kOverlap, "ANS query '" + inst.id + "' also appears in its training datastore");
    }
    for (const auto& variant : inst.variants) {
      const Embedding query = transform ? transform->apply(variant.embedding) : variant.embedding;
      const NeighborList neighbors = search(store, query.values(), hp.k_max);
      rows.push_back(make_ans_row(neighbors, softmax(variant.plm_logits), *inst.label, hp.k_max, hp.tau));
    }
  }
  return rows;
}

double ans_loss(const AnsModel& model, std::span<const double> params, std::span<const AnsRow> rows,
                std::span<const std::size_t> indices, std::span<double> grad) {
  if (params.size() != model.params.size()) fail(ErrorCode::kDimensionMismatch, "ANS parameter length mismatch");
  if (!grad.empty() && grad.size() != params.size()) {
    fail(ErrorCode::kDimensionMismatch, "ANS gradient length mismatch");
  }
  if (indices.empty()) fail(ErrorCode::kInvalidInput, "empty ANS batch");

  const std::size_t n_in = model.input_dim();
  const std::size_t n_hidden = model.hidden;
  const std::size_t n_out = model.choices.size();
  const auto& manifest = model.params.manifest();
  const double* w2 = params.data() + manifest[2].offset;
  const double scale = 1.0 / static_cast<double>(indices.size());

  AnsPass pass;
  std::vector<double> d_logits(n_out), d_hidden(n_hidden);
  double total = 0.0;
  for (std::size_t idx : indices) {
    const AnsRow& row = rows[idx];
    check_features(model, row.features.size());
    ans_forward_pass(model, params, row.features, pass);

    double p_gold = 0.0;
    for (std::size_t j = 0; j < n_out; ++j) p_gold += pass.gate[j] * row.gold_probs[j];
    total += -std::log(std::max(p_gold, kProbabilityFloor));
    if (grad.empty() || p_gold <= kProbabilityFloor) continue;

    // dL/dz2_j = a_j (1 - q_j / p) for L = -log(sum_j a_j q_j).
    for (std::size_t j = 0; j < n_out; ++j) d_logits[j] = pass.gate[j] * (1.0 - row.gold_probs[j] / p_gold) * scale;

    double* g_w1 = grad.data() + manifest[0].offset;
    double* g_b1 = grad.data() + manifest[1].offset;
    double* g_w2 = grad.data() + manifest[2].offset;
    double* g_b2 = grad.data() + manifest[3].offset;
    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      g_b2[o] += d_logits[o];
      for (std::size_t h = 0; h < n_hidden; ++h) {
        g_w2[o * n_hidden + h] += d_logits[o] * pass.hidden[h];
        d_hidden[h] += w2[o * n_hidden + h] * d_logits[o];
      }
    }
    for (std::size_t h = 0; h < n_hidden; ++h) {
      if (pass.pre_hidden[h] <= 0.0) continue;
      g_b1[h] += d_hidden[h];
      for (std::size_t i = 0; i < n_in; ++i) g_w1[h * n_in + i] += d_hidden[h] * pass.input[i];
    }
  }
  return total * scale;
}

AnsTrainResult train_ans(std::span<const Instance> queries, const Datastore& store, const Hyperparams& hp,
                         const EmbeddingTransform* transform) {
  hp.validate();
  if (queries.empty()) fail(ErrorCode::kInvalidInput, "no ANS training queries");
  if (store.empty()) fail(ErrorCode::kEmptyDatastore, "ANS training datastore is empty");

  const std::vector<AnsRow> rows = make_ans_rows(queries, store, hp, transform);

  AnsModel model = make_ans_model(hp.k_max, hp.ans_hidden);
  Rng init_rng(derive_seed(hp.seed, kInitStream));
  init_ans_model(model, init_rng);

  if (hp.ans_standardize_features) {
    const std::size_t n_in = model.input_dim();
    model.feature_mean.assign(n_in, 0.0);
    model.feature_scale.assign(n_in, 1.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      double mean = 0.0;
      for (const auto& row : rows) mean += row.features[i];
      mean /= static_cast<double>(rows.size());
      double var = 0.0;
      for (const auto& row : rows) var += (row.features[i] - mean) * (row.features[i] - mean);
      var /= static_cast<double>(rows.size());
      model.feature_mean[i] = mean;
      model.feature_scale[i] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    }
  }

  Rng shuffle_rng(derive_seed(hp.seed, kShuffleStream));
  const TrainSchedule schedule{hp.lr, hp.batch_size, hp.epochs};
  TrainingCurve curve = train_adam(model.params, rows.size(), schedule, shuffle_rng,
                                   [&](std::span<const double> params, std::span<const std::size_t> batch,
                                       std::span<double> grad) { return ans_loss(model, params, rows, batch, grad); });
  return {std::move(model), std::move(curve)};
}

}  // namespace knnc
