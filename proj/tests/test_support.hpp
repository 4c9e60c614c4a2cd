#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <knnc/knnc.hpp>

namespace knnc::testing {

inline Variant make_variant(std::vector<double> embedding, std::vector<double> logits) {
  return Variant{Embedding(std::move(embedding)), std::move(logits)};
}

inline Instance make_instance(std::string id, Split split, std::optional<std::size_t> label,
                              std::vector<Variant> variants) {
  Instance inst;
  inst.id = std::move(id);
  inst.split = split;
  inst.label = label;
  inst.variants = std::move(variants);
  return inst;
}

// Random instance with `n_variants` gaussian embeddings and logits.
inline Instance random_instance(Rng& rng, std::string id, Split split, std::size_t label, std::size_t dim,
                                std::size_t n_labels, std::size_t n_variants) {
  std::vector<Variant> vs;
  for (std::size_t v = 0; v < n_variants; ++v) {
    std::vector<double> e(dim), l(n_labels);
    for (double& x : e) x = rng.normal();
    for (double& x : l) x = rng.normal();
    vs.push_back(make_variant(std::move(e), std::move(l)));
  }
  return make_instance(std::move(id), split, label, std::move(vs));
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// kNN distribution recomputed from scratch: full sort of all records, no shift trick.
inline std::vector<double> brute_knn(const std::vector<std::vector<double>>& keys, const std::vector<std::size_t>& values,
                                     const std::vector<double>& query, std::size_t k, double tau,
                                     std::size_t n_labels) {
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < keys.size(); ++i) order.emplace_back(sq_dist(keys[i], query), i);
  std::sort(order.begin(), order.end());
  std::vector<double> w(n_labels, 0.0);
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    w[values[order[i].second]] += std::exp(-order[i].first / tau);
  }
  double z = 0.0;
  for (double x : w) z += x;
  for (double& x : w) x /= z;
  return w;
}

inline std::vector<double> softmax_ref(const std::vector<double>& l) {
  std::vector<double> e(l.size());
  double z = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) z += (e[i] = std::exp(l[i]));
  for (double& x : e) x /= z;
  return e;
}

}  // namespace knnc::testing
