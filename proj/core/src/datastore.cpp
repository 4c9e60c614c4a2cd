#include "knnc/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "knnc/error.hpp"

namespace knnc {

void Datastore::add(DatastoreRecord record) {
  if (record.key.size() != dim_) {
    fail(ErrorCode::kDimensionMismatch, "record key has dimension " + std::to_string(record.key.size()) +
                                            ", datastore expects " + std::to_string(dim_));
  }
  records_.push_back(std::move(record));
}

bool Datastore::contains_instance(std::string_view instance_id) const {
  return std::any_of(records_.begin(), records_.end(),
                     [&](const DatastoreRecord& r) { return r.source_instance == instance_id; });
}

InstanceFilter in_split(Split split) {
  return [split](const Instance& inst) { return inst.split == split; };
}

InstanceFilter id_in(std::vector<std::string> ids) {
  std::set<std::string> lookup(std::make_move_iterator(ids.begin()), std::make_move_iterator(ids.end()));
  return [lookup = std::move(lookup)](const Instance& inst) { return lookup.count(inst.id) > 0; };
}

namespace {

void append_instance(Datastore& store, const Instance& inst, std::size_t n_labels,
                     const EmbeddingTransform* transform) {
  if (!inst.label) fail(ErrorCode::kMissingLabel, "instance '" + inst.id + "' has no label");
  if (*inst.label >= n_labels) fail(ErrorCode::kInvalidInput, "label index out of range for '" + inst.id + "'");
  for (std::size_t v = 0; v < inst.variants.size(); ++v) {
    const Embedding& raw = inst.variants[v].embedding;
    Embedding key = transform ? transform->apply(raw) : raw;
    if (key.size() != store.dim()) {
      fail(ErrorCode::kDimensionMismatch, "transformed key of '" + inst.id + "' has dimension " +
                                              std::to_string(key.size()) + ", expected " +
                                              std::to_string(store.dim()));
    }
    store.add({std::move(key), *inst.label, inst.id, v});
  }
}

}  // namespace

Datastore build_datastore(const Dataset& dataset, const InstanceFilter& filter,
                          const EmbeddingTransform* transform) {
  Datastore store(transform ? transform->output_dim() : dataset.dim);
  for (const auto& inst : dataset.instances) {
    if (filter && !filter(inst)) continue;
    append_instance(store, inst, dataset.label_space.size(), transform);
  }
  return store;
}

Datastore build_datastore(std::span<const Instance> instances, std::size_t dim, std::size_t n_labels,
                          const EmbeddingTransform* transform) {
  Datastore store(transform ? transform->output_dim() : dim);
  for (const auto& inst : instances) append_instance(store, inst, n_labels, transform);
  return store;
}

NeighborList search(const Datastore& store, std::span<const double> query, std::size_t k,
                    std::optional<std::string_view> exclude_instance) {
  if (query.size() != store.dim()) {
    fail(ErrorCode::kDimensionMismatch, "query has dimension " + std::to_string(query.size()) +
                                            ", datastore expects " + std::to_string(store.dim()));
  }
  if (k == 0) fail(ErrorCode::kInvalidInput, "k must be positive");

  struct Candidate {
    double squared;
    std::size_t index;
  };
  std::vector<Candidate> pool;
  pool.reserve(store.size());
  const auto& records = store.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (exclude_instance && records[i].source_instance == *exclude_instance) continue;
    const double* key = records[i].key.data();
    double sq = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      const double diff = key[j] - query[j];
      sq += diff * diff;
    }
    pool.push_back({sq, i});
  }
  if (pool.empty()) fail(ErrorCode::kEmptyDatastore, "no searchable records");

  const std::size_t take = std::min(k, pool.size());
  auto by_distance = [](const Candidate& a, const Candidate& b) {
    return a.squared < b.squared || (a.squared == b.squared && a.index < b.index);
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(), by_distance);

  NeighborList out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({std::sqrt(pool[i].squared), records[pool[i].index].value, pool[i].index});
  }
  return out;
}

NeighborFeatures distinct_count_features(std::span<const Neighbor> neighbors, std::size_t k_max) {
  if (neighbors.empty()) fail(ErrorCode::kInvalidInput, "no neighbors to featurize");
  if (k_max == 0) fail(ErrorCode::kInvalidInput, "k_max must be positive");

  NeighborFeatures features;
  features.distances.reserve(k_max);
  features.counts.reserve(k_max);
  std::set<std::size_t> seen;
  const std::size_t real = std::min(neighbors.size(), k_max);
  for (std::size_t i = 0; i < real; ++i) {
    seen.insert(neighbors[i].value);
    features.distances.push_back(neighbors[i].distance);
    features.counts.push_back(static_cast<double>(seen.size()));
  }
  while (features.distances.size() < k_max) {
    features.distances.push_back(features.distances.back());
    features.counts.push_back(features.counts.back());
  }
  return features;
}

}  // namespace knnc
