#include "knnc/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "knnc/error.hpp"
#include "knnc/rng.hpp"

namespace knnc {

namespace {

std::string make_id(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04zu", std::string(to_string(split)).c_str(), index);
  return buf;
}

std::vector<std::string> label_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n; ++c) names.push_back("label" + std::to_string(c));
  return names;
}

void add_noise(std::vector<double>& v, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  const double per_coord = sigma / std::sqrt(static_cast<double>(v.size()));
  for (double& x : v) x += per_coord * rng.normal();
}

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::kInvalidConfig, m); };
  if (n_labels < 2) bad("need at least 2 labels");
  if (dim < 2 * n_labels) bad("dim must be at least 2 * n_labels");
  if (k_shots < 2) bad("k_shots must be at least 2");
  if (!(class_sep >= 0.0) || !(variant_noise >= 0.0) || !(cluster_noise >= 0.0)) bad("scales must be non-negative");
  if (!std::isfinite(readout_bias) || !std::isfinite(readout_rotation) || !std::isfinite(readout_gain)) {
    bad("readout parameters must be finite");
  }
}

SynthConfig noiseless_preset() {
  SynthConfig c;
  c.dim = 8;
  c.k_shots = 4;
  c.n_test = 20;
  c.class_sep = 1.0;
  c.variant_noise = 0.0;
  c.cluster_noise = 0.0;
  return c;
}

SynthConfig chance_preset() {
  SynthConfig c;
  c.dim = 8;
  c.k_shots = 16;
  c.n_test = 400;
  c.class_sep = 0.0;
  c.cluster_noise = 1.0;
  c.variant_noise = 0.3;
  return c;
}

SynthConfig biased_plm_preset() {
  SynthConfig c;
  c.dim = 64;
  c.n_labels = 2;
  c.k_shots = 16;
  c.n_test = 500;
  c.class_sep = 1.0;
  c.cluster_noise = 1.0;
  c.variant_noise = 0.3;
  c.readout_rotation = 1.4;
  c.readout_bias = 1.0;
  return c;
}

Dataset generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n = config.n_labels;
  const std::size_t dim = config.dim;

  std::vector<std::vector<double>> means(n, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < n; ++c) means[c][c] = config.class_sep / std::sqrt(2.0);

  // Centered unit class axes restricted to the first n coordinates.
  const double axis_norm = std::sqrt(1.0 - 1.0 / static_cast<double>(n));
  std::vector<std::vector<double>> axes(n, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t j = 0; j < n; ++j) {
      axes[c][j] = ((c == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n)) / axis_norm;
    }
  }
  const double cos_r = std::cos(config.readout_rotation);
  const double sin_r = std::sin(config.readout_rotation);

  auto readout = [&](const std::vector<double>& e) {
    std::vector<double> rotated(n);
    for (std::size_t j = 0; j < n; ++j) rotated[j] = cos_r * e[j] - sin_r * e[n + j];
    std::vector<double> logits(n);
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += axes[c][j] * rotated[j];
      logits[c] = config.readout_gain * s + (c == 0 ? config.readout_bias : 0.0);
    }
    return logits;
  };

  Dataset ds;
  ds.label_space = LabelSpace(label_names(n));
  ds.dim = dim;
  ds.k_shots = config.k_shots;

  auto emit = [&](Split split, std::size_t index, std::size_t label) {
    Instance inst;
    inst.id = make_id(split, index);
    inst.split = split;
    inst.label = label;
    std::vector<double> base = means[label];
    add_noise(base, config.cluster_noise, rng);
    for (std::size_t v = 0; v < config.k_shots; ++v) {
      std::vector<double> e = base;
      add_noise(e, config.variant_noise, rng);
      std::vector<double> logits = readout(e);
      inst.variants.push_back({Embedding(std::move(e)), std::move(logits)});
    }
    ds.instances.push_back(std::move(inst));
  };

  for (Split split : {Split::kTrain, Split::kDev}) {
    std::size_t index = 0;
    for (std::size_t i = 0; i < config.k_shots; ++i) {
      for (std::size_t c = 0; c < n; ++c) emit(split, index++, c);
    }
  }
  for (std::size_t i = 0; i < config.n_test; ++i) emit(Split::kTest, i, i % n);

  ds.validate();
  return ds;
}

void CoincidentConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::kInvalidConfig, m); };
  if (dim < 2) bad("dim must be at least 2");
  if (k_shots < 2) bad("k_shots must be at least 2");
  if (!(location_spread >= 0.0) || !(label_offset >= 0.0) || !(variant_noise >= 0.0)) {
    bad("scales must be non-negative");
  }
}

Dataset generate_coincident(const CoincidentConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t dim = config.dim;
  constexpr std::size_t kLabels = 2;

  Dataset ds;
  ds.label_space = LabelSpace(label_names(kLabels));
  ds.dim = dim;
  ds.k_shots = config.k_shots;

  auto emit_pair = [&](Split split, std::size_t& index) {
    std::vector<double> location(dim, 0.0);
    const double per_coord = config.location_spread / std::sqrt(static_cast<double>(dim - 1));
    for (std::size_t j = 0; j + 1 < dim; ++j) location[j] = per_coord * rng.normal();
    for (std::size_t c = 0; c < kLabels; ++c) {
      Instance inst;
      inst.id = make_id(split, index++);
      inst.split = split;
      inst.label = c;
      std::vector<double> base = location;
      base[dim - 1] = c == 0 ? -config.label_offset : config.label_offset;
      for (std::size_t v = 0; v < config.k_shots; ++v) {
        std::vector<double> e = base;
        add_noise(e, config.variant_noise, rng);
        inst.variants.push_back({Embedding(std::move(e)), std::vector<double>(kLabels, 0.0)});
      }
      ds.instances.push_back(std::move(inst));
    }
  };

  for (Split split : {Split::kTrain, Split::kDev}) {
    std::size_t index = 0;
    for (std::size_t i = 0; i < config.k_shots; ++i) emit_pair(split, index);
  }
  std::size_t index = 0;
  for (std::size_t i = 0; i < (config.n_test + 1) / kLabels; ++i) emit_pair(Split::kTest, index);

  ds.validate();
  return ds;
}

double centroid_oracle(const Dataset& dataset) {
  const std::size_t n = dataset.label_space.size();
  const std::size_t dim = dataset.dim;

  auto mean_embedding = [dim](const Instance& inst) {
    std::vector<double> m(dim, 0.0);
    for (const auto& v : inst.variants) {
      for (std::size_t j = 0; j < dim; ++j) m[j] += v.embedding[j];
    }
    for (double& x : m) x /= static_cast<double>(inst.variants.size());
    return m;
  };

  std::vector<std::vector<double>> centroids(n, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(n, 0);
  for (const auto& inst : dataset.instances) {
    if (inst.split != Split::kTrain || !inst.label) continue;
    const auto m = mean_embedding(inst);
    for (std::size_t j = 0; j < dim; ++j) centroids[*inst.label][j] += m[j];
    ++counts[*inst.label];
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (counts[c] == 0) fail(ErrorCode::kInvalidInput, "class without train instances");
    for (double& x : centroids[c]) x /= static_cast<double>(counts[c]);
  }

  std::size_t correct = 0, total = 0;
  for (const auto& inst : dataset.instances) {
    if (inst.split != Split::kTest || !inst.label) continue;
    const auto m = mean_embedding(inst);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) d += (m[j] - centroids[c][j]) * (m[j] - centroids[c][j]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == *inst.label;
    ++total;
  }
  if (total == 0) fail(ErrorCode::kInvalidInput, "no labeled test instances");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace knnc
