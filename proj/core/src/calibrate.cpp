#include "knnc/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "knnc/ans.hpp"
#include "knnc/error.hpp"
#include "knnc/optim.hpp"

namespace knnc {

Distribution knn_distribution(std::span<const Neighbor> neighbors, double tau, std::size_t n_labels) {
  if (neighbors.empty()) fail(ErrorCode::kInvalidInput, "kNN distribution needs at least one neighbor");
  if (!(tau > 0.0)) fail(ErrorCode::kInvalidInput, "tau must be positive");
  if (n_labels == 0) fail(ErrorCode::kInvalidInput, "empty label space");

  // Normalized weights are invariant to a common shift of -d^2/tau; shifting
  // by the smallest squared distance keeps the largest weight at exactly 1.
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& n : neighbors) nearest = std::min(nearest, n.distance * n.distance);

  std::vector<double> weights(n_labels, 0.0);
  for (const auto& n : neighbors) {
    if (n.value >= n_labels) fail(ErrorCode::kInvalidInput, "neighbor label out of range");
    weights[n.value] += std::exp(-(n.distance * n.distance - nearest) / tau);
  }
  return Distribution::normalized(std::move(weights));
}

Distribution interpolate(const Distribution& p_knn, const Distribution& p_lm, double lambda) {
  if (p_knn.size() != p_lm.size()) fail(ErrorCode::kDimensionMismatch, "distributions differ in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorCode::kInvalidInput, "lambda must lie in [0, 1]");
  if (lambda == 0.0) return p_knn;
  if (lambda == 1.0) return p_lm;
  std::vector<double> out(p_knn.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - lambda) * p_knn[i] + lambda * p_lm[i];
  return Distribution(std::move(out));
}

Distribution ensemble(std::span<const Distribution> parts, EnsembleRule rule) {
  if (parts.empty()) fail(ErrorCode::kInvalidInput, "nothing to ensemble");
  const std::size_t n = parts.front().size();
  for (const auto& p : parts) {
    if (p.size() != n) fail(ErrorCode::kDimensionMismatch, "ensemble members differ in length");
  }
  if (parts.size() == 1) return parts.front();

  // Summation runs over a sorted copy of each coordinate so the result does
  // not depend on variant order down to the last bit.
  std::vector<double> column(parts.size());
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < parts.size(); ++j) {
      column[j] = rule == EnsembleRule::kMeanProbability ? parts[j][i]
                                                         : std::log(std::max(parts[j][i], kProbabilityFloor));
    }
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double c : column) sum += c;
    out[i] = sum / static_cast<double>(parts.size());
  }
  if (rule == EnsembleRule::kMeanProbability) return Distribution::normalized(std::move(out));

  const double peak = *std::max_element(out.begin(), out.end());
  for (double& v : out) v = std::exp(v - peak);
  return Distribution::normalized(std::move(out));
}

Distribution icl_baseline(const Instance& instance) {
  if (instance.variants.empty()) fail(ErrorCode::kInvalidInput, "instance '" + instance.id + "' has no variants");
  std::vector<Distribution> parts;
  parts.reserve(instance.variants.size());
  for (const auto& v : instance.variants) parts.push_back(softmax(v.plm_logits));
  return ensemble(parts, EnsembleRule::kMeanProbability);
}

CalibratedPrediction predict_instance(const Instance& instance, const Datastore& store, const Hyperparams& hp,
                                      const PredictContext& context) {
  if (instance.variants.empty()) fail(ErrorCode::kInvalidInput, "instance '" + instance.id + "' has no variants");
  if (context.mode == PredictMode::kAnsAggregated && context.ans == nullptr) {
    fail(ErrorCode::kInvalidConfig, "adaptive neighbor selection requested without a trained model");
  }

  const std::size_t n_labels = instance.variants.front().plm_logits.size();
  std::vector<Distribution> finals, knns, lms;
  finals.reserve(instance.variants.size());
  knns.reserve(instance.variants.size());
  lms.reserve(instance.variants.size());
  std::size_t neighbors_used = 0;

  const std::optional<std::string_view> exclude =
      context.leave_instance_out ? std::optional<std::string_view>(instance.id) : std::nullopt;

  for (const auto& variant : instance.variants) {
    Distribution p_lm = softmax(variant.plm_logits);
    if (context.mode == PredictMode::kIcl) {
      finals.push_back(p_lm);
      knns.push_back(p_lm);
      lms.push_back(std::move(p_lm));
      continue;
    }

    const Embedding query = context.transform ? context.transform->apply(variant.embedding) : variant.embedding;
    const std::size_t depth = context.mode == PredictMode::kAnsAggregated ? std::max(hp.k, hp.k_max) : hp.k;
    const NeighborList neighbors = search(store, query.values(), depth, exclude);
    neighbors_used = std::max(neighbors_used, neighbors.size());

    const std::size_t k_prefix = std::min(hp.k, neighbors.size());
    Distribution p_knn =
        knn_distribution(std::span<const Neighbor>(neighbors).first(k_prefix), hp.tau, n_labels);

    switch (context.mode) {
      case PredictMode::kKnnOnly:
        finals.push_back(p_knn);
        break;
      case PredictMode::kFixedLambda:
        finals.push_back(interpolate(p_knn, p_lm, hp.lambda));
        break;
      case PredictMode::kAnsAggregated:
        finals.push_back(ans_aggregate(*context.ans, p_lm, neighbors, hp.tau));
        break;
      case PredictMode::kIcl:
        break;
    }
    knns.push_back(std::move(p_knn));
    lms.push_back(std::move(p_lm));
  }

  return CalibratedPrediction{ensemble(finals, hp.ensemble), ensemble(knns, hp.ensemble), ensemble(lms, hp.ensemble),
                              neighbors_used};
}

}  // namespace knnc
