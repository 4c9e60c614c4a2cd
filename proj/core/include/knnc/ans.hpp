#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knnc/datastore.hpp"
#include "knnc/optim.hpp"
#include "knnc/types.hpp"

namespace knnc {

/// Candidate neighbor counts {0, 4, 8, ..., k_max}; 0 means "base model only".
std::vector<std::size_t> ans_choices(std::size_t k_max);

/// Two-layer gating network over neighbor features [d, c].
///
/// Parameter tensors: w1 (hidden x 2*k_max), b1 (hidden), w2 (|choices| x
/// hidden), b2 (|choices|), all row-major. When `feature_mean` is non-empty
/// inputs are standardized as (x - mean) * scale before the first layer.
struct AnsModel {
  std::size_t k_max = 0;
  std::size_t hidden = 0;
  std::vector<std::size_t> choices;
  ParamVector params;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  std::size_t input_dim() const noexcept { return 2 * k_max; }

  bool operator==(const AnsModel&) const = default;
};

/// Zero-initialized model with the right shapes.
AnsModel make_ans_model(std::size_t k_max, std::size_t hidden);
/// Weights and biases uniform in +-1/sqrt(fan_in) per layer.
void init_ans_model(AnsModel& model, Rng& rng);

/// p_a(k | x): softmax over `model.choices`.
Distribution ans_forward(const AnsModel& model, std::span<const double> distances, std::span<const double> counts);

/// sum_i p_a(k_i) * p_{k_i NN}, where p_{0NN} is `p_lm` and the k_i-NN
/// distributions reuse prefixes of the single k_max-deep neighbor list.
Distribution ans_aggregate(const AnsModel& model, const Distribution& p_lm, std::span<const Neighbor> neighbors,
                           double tau);

/// One training example: the (unstandardized) gating input and the gold-label
/// probability under every candidate distribution.
struct AnsRow {
  std::vector<double> features;    // [d_1..d_kmax, c_1..c_kmax]
  std::vector<double> gold_probs;  // aligned with AnsModel::choices
};

AnsRow make_ans_row(std::span<const Neighbor> neighbors, const Distribution& p_lm, std::size_t gold,
                    std::size_t k_max, double tau);

/// One row per (query instance, variant). Throws OverlapError when the
/// store holds records of any query instance.
std::vector<AnsRow> make_ans_rows(std::span<const Instance> queries, const Datastore& store, const Hyperparams& hp,
                                  const EmbeddingTransform* transform = nullptr);

/// Mean cross-entropy of the aggregated prediction over `rows[indices]`
/// at `params` (shaped like `model.params`). Adds the gradient of that mean
/// into `grad` when non-empty.
double ans_loss(const AnsModel& model, std::span<const double> params, std::span<const AnsRow> rows,
                std::span<const std::size_t> indices, std::span<double> grad);

struct AnsTrainResult {
  AnsModel model;
  TrainingCurve curve;
};

AnsTrainResult train_ans(std::span<const Instance> queries, const Datastore& store, const Hyperparams& hp,
                         const EmbeddingTransform* transform = nullptr);

}  // namespace knnc
