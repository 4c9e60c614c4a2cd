#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knnc/types.hpp"

namespace knnc {

/// A map from a representation space into another (identity when absent).
/// Implemented by the feature-regularization projection.
class EmbeddingTransform {
 public:
  virtual ~EmbeddingTransform() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual Embedding apply(const Embedding& input) const = 0;
};

struct DatastoreRecord {
  Embedding key;
  std::size_t value = 0;  // label index
  std::string source_instance;
  std::size_t variant_index = 0;
};

/// Key-value cache of few-shot representations. Immutable once built; search
/// is read-only and may run concurrently.
class Datastore {
 public:
  explicit Datastore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<DatastoreRecord>& records() const noexcept { return records_; }
  const DatastoreRecord& operator[](std::size_t i) const { return records_[i]; }

  void add(DatastoreRecord record);

  /// True when any record originates from `instance_id`.
  bool contains_instance(std::string_view instance_id) const;

 private:
  std::size_t dim_;
  std::vector<DatastoreRecord> records_;
};

using InstanceFilter = std::function<bool(const Instance&)>;

InstanceFilter in_split(Split split);
InstanceFilter id_in(std::vector<std::string> ids);

/// One record per (instance, variant) passing `filter`, in file order then
/// variant order. Keys pass through `transform` when given.
Datastore build_datastore(const Dataset& dataset, const InstanceFilter& filter,
                          const EmbeddingTransform* transform = nullptr);

/// Same as above over an explicit instance list (all of which are selected).
Datastore build_datastore(std::span<const Instance> instances, std::size_t dim,
                          std::size_t n_labels, const EmbeddingTransform* transform = nullptr);

struct Neighbor {
  double distance = 0.0;  // euclidean
  std::size_t value = 0;
  std::size_t record_index = 0;

  bool operator==(const Neighbor&) const = default;
};

/// Sorted ascending by (distance, record_index).
using NeighborList = std::vector<Neighbor>;

/// Exact k nearest records by euclidean distance, skipping records whose
/// source instance equals `exclude_instance`. Returns fewer than k entries
/// only when the searchable pool is smaller.
NeighborList search(const Datastore& store, std::span<const double> query, std::size_t k,
                    std::optional<std::string_view> exclude_instance = std::nullopt);

struct NeighborFeatures {
  std::vector<double> distances;  // d_1..d_kmax
  std::vector<double> counts;     // c_i = distinct labels among the first i neighbors
};

/// Distances and distinct-label prefix counts, right-padded to `k_max` by
/// repeating the last real entry when fewer neighbors are available.
/// Neighbors beyond `k_max` are ignored.
NeighborFeatures distinct_count_features(std::span<const Neighbor> neighbors, std::size_t k_max);

}  // namespace knnc
