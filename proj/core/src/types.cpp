#include "knnc/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "knnc/error.hpp"

namespace knnc {

LabelSpace::LabelSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    throw SchemaError("labels", "label space needs at least 2 classes");
  }
  std::set<std::string_view> seen;
  for (const auto& label : labels_) {
    if (!seen.insert(label).second) {
      throw SchemaError("labels", "duplicate label '" + label + "'");
    }
  }
}

std::optional<std::size_t> LabelSpace::find(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t LabelSpace::index_of(std::string_view label) const {
  if (auto index = find(label)) return *index;
  throw SchemaError("label", "undeclared label '" + std::string(label) + "'");
}

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) fail(ErrorCode::kInvalidInput, "empty distribution");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      fail(ErrorCode::kInvalidInput, "distribution entries must be finite and non-negative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    fail(ErrorCode::kInvalidInput, "distribution sums to " + std::to_string(sum));
  }
}

Distribution Distribution::uniform(std::size_t n) {
  if (n == 0) fail(ErrorCode::kInvalidInput, "empty distribution");
  return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Distribution Distribution::one_hot(std::size_t n, std::size_t index) {
  if (index >= n) fail(ErrorCode::kInvalidInput, "one-hot index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return Distribution(std::move(p));
}

Distribution Distribution::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      fail(ErrorCode::kNumerical, "weights must be finite and non-negative");
    }
    sum += w;
  }
  if (!(sum > 0.0)) fail(ErrorCode::kNumerical, "weights sum to zero");
  for (double& w : weights) w /= sum;
  return Distribution(std::move(weights));
}

std::size_t Distribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidInput, "embedding entries must be finite");
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "dev") return Split::kDev;
  if (text == "test") return Split::kTest;
  throw SchemaError("split", "unknown split '" + std::string(text) + "'");
}

void Dataset::validate() const {
  const std::size_t n_labels = label_space.size();
  if (n_labels < 2) throw SchemaError("labels", "label space needs at least 2 classes");
  if (dim == 0) throw SchemaError("dim", "dimension must be positive");
  if (k_shots == 0) throw SchemaError("k_shots", "k_shots must be positive");

  std::set<std::string_view> ids;
  std::vector<std::size_t> train_per_class(n_labels, 0);
  std::vector<std::size_t> dev_per_class(n_labels, 0);

  for (const auto& inst : instances) {
    const std::string path = "instances[" + inst.id + "]";
    if (inst.id.empty()) throw SchemaError("instances[]", "instance id is empty");
    if (!ids.insert(inst.id).second) throw SchemaError(path + ".id", "duplicate instance id");
    if (inst.label && *inst.label >= n_labels) {
      throw SchemaError(path + ".label", "label index out of range");
    }
    if (inst.split != Split::kTest && !inst.label) {
      throw SchemaError(path + ".label", "train and dev instances must be labeled");
    }
    if (inst.variants.empty()) throw SchemaError(path + ".variants", "no variants");
    if (inst.variants.size() > k_shots) {
      throw SchemaError(path + ".variants", "more variants than k_shots");
    }
    for (std::size_t v = 0; v < inst.variants.size(); ++v) {
      const auto& variant = inst.variants[v];
      const std::string vpath = path + ".variants[" + std::to_string(v) + "]";
      if (variant.embedding.size() != dim) {
        throw SchemaError(vpath + ".embedding", "expected dimension " + std::to_string(dim) +
                                                    ", got " + std::to_string(variant.embedding.size()));
      }
      if (variant.plm_logits.size() != n_labels) {
        throw SchemaError(vpath + ".logits", "expected " + std::to_string(n_labels) + " logits, got " +
                                                 std::to_string(variant.plm_logits.size()));
      }
      for (double l : variant.plm_logits) {
        if (!std::isfinite(l)) throw SchemaError(vpath + ".logits", "non-finite logit");
      }
    }
    if (inst.split == Split::kTrain) ++train_per_class[*inst.label];
    if (inst.split == Split::kDev) ++dev_per_class[*inst.label];
  }
  for (std::size_t c = 0; c < n_labels; ++c) {
    if (train_per_class[c] != k_shots) {
      throw SchemaError("instances", "train split has " + std::to_string(train_per_class[c]) +
                                         " instances of class '" + label_space.label(c) + "', expected " +
                                         std::to_string(k_shots));
    }
    if (dev_per_class[c] != k_shots) {
      throw SchemaError("instances", "dev split has " + std::to_string(dev_per_class[c]) +
                                         " instances of class '" + label_space.label(c) + "', expected " +
                                         std::to_string(k_shots));
    }
  }
}

std::vector<Instance> Dataset::split(Split which) const {
  std::vector<Instance> out;
  std::copy_if(instances.begin(), instances.end(), std::back_inserter(out),
               [which](const Instance& inst) { return inst.split == which; });
  return out;
}

void Hyperparams::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::kInvalidConfig, msg); };
  if (!(lambda >= 0.0 && lambda <= 1.0)) bad("lambda must lie in [0, 1]");
  if (!(tau > 0.0) || !std::isfinite(tau)) bad("tau must be positive");
  if (k == 0) bad("k must be positive");
  if (k_max == 0 || k_max % 4 != 0) bad("k_max must be a positive multiple of 4");
  if (k > k_max) bad("k must not exceed k_max");
  if (z_dim == 0) bad("z_dim must be positive");
  if (ans_hidden == 0) bad("ans_hidden must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) bad("lr must be positive");
  if (batch_size == 0) bad("batch_size must be positive");
  if (epochs == 0) bad("epochs must be positive");
}

Distribution softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) fail(ErrorCode::kInvalidInput, "softmax of empty vector");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCode::kInvalidInput, "softmax temperature must be positive");
  }
  for (double l : logits) {
    if (!std::isfinite(l)) fail(ErrorCode::kInvalidInput, "softmax input must be finite");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - peak) / temperature);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return Distribution(std::move(out));
}

}  // namespace knnc
