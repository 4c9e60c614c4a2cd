#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace knnc {

/// Ordered set of class identifiers. Order is the declaration order of the
/// producing file and fixes the column order of every logit/probability vector.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::optional<std::size_t> find(std::string_view label) const;
  /// Throws SchemaError when the label is not declared.
  std::size_t index_of(std::string_view label) const;

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// Probability vector over a label space (or over the ANS choice set).
/// Construction checks non-negativity and |sum - 1| <= 1e-9; values are stored
/// as given, never silently renormalized.
class Distribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit Distribution(std::vector<double> probs);

  static Distribution uniform(std::size_t n);
  static Distribution one_hot(std::size_t n, std::size_t index);
  /// Divides by the sum first; `weights` must be non-negative with positive sum.
  static Distribution normalized(std::vector<double> weights);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const noexcept { return probs_; }
  /// First index of the maximum.
  std::size_t argmax() const;

  bool operator==(const Distribution&) const = default;

 private:
  std::vector<double> probs_;
};

/// Dense representation vector; all entries finite.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
};

/// One demonstration sampling of an instance: the cached representation and
/// the base model's label logits for that sampling.
struct Variant {
  Embedding embedding;
  std::vector<double> plm_logits;

  bool operator==(const Variant&) const = default;
};

enum class Split { kTrain, kDev, kTest };

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

struct Instance {
  std::string id;
  Split split = Split::kTrain;
  std::optional<std::size_t> label;  // index into the dataset's LabelSpace
  std::vector<Variant> variants;

  bool operator==(const Instance&) const = default;
};

struct Dataset {
  LabelSpace label_space;
  std::size_t dim = 0;
  std::size_t k_shots = 0;
  std::vector<Instance> instances;

  /// Enforces every structural invariant; throws SchemaError naming the field.
  void validate() const;

  std::vector<Instance> split(Split which) const;

  bool operator==(const Dataset&) const = default;
};

enum class EnsembleRule {
  kMeanProbability,     // arithmetic mean of per-variant distributions
  kMeanLogProbability,  // normalized geometric mean, for sensitivity checks
};

enum class FrObjective {
  kTopK,       // softmax over the k retrieved neighbors
  kFullStore,  // softmax over every record, fully differentiable
};

struct Hyperparams {
  double lambda = 0.5;
  double tau = 5.0;
  std::size_t k = 8;
  std::size_t k_max = 16;
  std::size_t z_dim = 32;
  std::size_t ans_hidden = 32;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;

  EnsembleRule ensemble = EnsembleRule::kMeanProbability;
  FrObjective fr_objective = FrObjective::kTopK;
  bool ans_standardize_features = false;

  /// Throws InvalidConfig on violated constraints.
  void validate() const;
};

/// exp(l_i / T) / sum_j exp(l_j / T), computed with max subtraction.
Distribution softmax(std::span<const double> logits, double temperature = 1.0);

}  // namespace knnc
