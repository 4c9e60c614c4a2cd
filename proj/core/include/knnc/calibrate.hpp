#pragma once

#include <cstddef>
#include <span>

#include "knnc/datastore.hpp"
#include "knnc/types.hpp"

namespace knnc {

struct AnsModel;

/// p(y) proportional to the sum over neighbors labeled y of exp(-d^2 / tau).
/// Labels absent from the neighbor set get exactly zero.
Distribution knn_distribution(std::span<const Neighbor> neighbors, double tau, std::size_t n_labels);

/// (1 - lambda) * p_knn + lambda * p_lm.
Distribution interpolate(const Distribution& p_knn, const Distribution& p_lm, double lambda);

/// Mean over variants of softmax(plm_logits) at temperature 1.
Distribution icl_baseline(const Instance& instance);

/// Combines per-variant distributions per the ensemble rule.
Distribution ensemble(std::span<const Distribution> parts, EnsembleRule rule);

enum class PredictMode {
  kIcl,            // base model only
  kKnnOnly,        // kNN distribution over k neighbors, lambda ignored
  kFixedLambda,    // interpolation with hp.lambda
  kAnsAggregated,  // adaptive neighbor selection over k_max neighbors
};

struct PredictContext {
  PredictMode mode = PredictMode::kFixedLambda;
  const EmbeddingTransform* transform = nullptr;  // applied to query variants
  const AnsModel* ans = nullptr;                  // required for kAnsAggregated
  bool leave_instance_out = false;                // skip the query's own records
};

struct CalibratedPrediction {
  Distribution final;
  Distribution p_knn;
  Distribution p_lm;
  std::size_t neighbors_used = 0;  // neighbors retrieved per variant (max over variants)
};

/// Scores every variant of `instance` and ensembles. `p_lm` is the ensemble
/// of per-variant base distributions; `p_knn` the ensemble of per-variant kNN
/// distributions over hp.k neighbors (equal to `p_lm` in ICL mode).
CalibratedPrediction predict_instance(const Instance& instance, const Datastore& store, const Hyperparams& hp,
                                      const PredictContext& context);

}  // namespace knnc
