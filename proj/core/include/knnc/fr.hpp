#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knnc/datastore.hpp"
#include "knnc/optim.hpp"
#include "knnc/types.hpp"

namespace knnc {

/// Linear-plus-ReLU projection h -> max(0, W_f h + b_f) into a z_dim space.
/// Tensors: w_f (z_dim x input_dim, row-major) and b_f (z_dim).
class FrModel final : public EmbeddingTransform {
 public:
  FrModel() = default;
  FrModel(std::size_t input_dim, std::size_t z_dim);

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t output_dim() const override { return z_dim_; }
  Embedding apply(const Embedding& input) const override;

  ParamVector& params() noexcept { return params_; }
  const ParamVector& params() const noexcept { return params_; }

  bool operator==(const FrModel& other) const {
    return input_dim_ == other.input_dim_ && z_dim_ == other.z_dim_ && params_ == other.params_;
  }

 private:
  std::size_t input_dim_ = 0;
  std::size_t z_dim_ = 0;
  ParamVector params_;
};

void init_fr_model(FrModel& model, Rng& rng);

Embedding fr_transform(const FrModel& model, const Embedding& h);

struct LabeledPoint {
  Embedding embedding;
  std::size_t label = 0;
};

/// Indices of the k stored points nearest to the query in projected space,
/// ordered by (distance, index). One entry per query row.
using FrSelections = std::vector<std::vector<std::size_t>>;

/// -log max(p_kNN(gold), 1e-12) with both query and store projected by the
/// current model and the k nearest projected points retrieved.
double fr_loss(const FrModel& model, const LabeledPoint& query, std::span<const LabeledPoint> store, std::size_t k,
               double tau);

struct FrBatchOptions {
  std::size_t k = 8;
  double tau = 5.0;
  /// When set, reuse these neighbor selections (one per entry of `indices`)
  /// instead of retrieving in the current projected space.
  const FrSelections* fixed_selection = nullptr;
  /// When set, receives the selections used.
  FrSelections* selection_out = nullptr;
};

/// Mean loss over `queries[indices]` at `params` (shaped like
/// `model.params()`). Neighbor selection is treated as constant; the
/// gradient of the mean is added into `grad` when non-empty.
double fr_batch_loss(const FrModel& model, std::span<const double> params, std::span<const LabeledPoint> queries,
                     std::span<const std::size_t> indices, std::span<const LabeledPoint> store,
                     const FrBatchOptions& options, std::span<double> grad);

/// (embedding, label) for every variant of every instance, in order.
std::vector<LabeledPoint> labeled_points(std::span<const Instance> instances);

struct FrTrainResult {
  FrModel model;
  TrainingCurve curve;
};

/// Trains the projection so that queries retrieve same-label neighbors from
/// `store_instances`. The two instance sets must be disjoint.
FrTrainResult train_fr(std::span<const Instance> queries, std::span<const Instance> store_instances,
                       const Hyperparams& hp);

}  // namespace knnc
