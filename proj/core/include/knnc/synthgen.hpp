#pragma once

#include <cstddef>
#include <cstdint>

#include "knnc/types.hpp"

namespace knnc {

/// Class-clustered synthetic representations with a controllably wrong
/// simulated base-model readout.
///
/// Noise scales are RMS vector norms: a noise draw is N(0, (sigma^2 / dim) I),
/// so its expected squared length is sigma^2 regardless of `dim`.
///
/// Class means sit on a scaled simplex (mean_c = class_sep / sqrt(2) * e_c),
/// so every pair of means is `class_sep` apart. The simulated readout scores
/// class c as readout_gain * <u_c, R e> (+ readout_bias for class 0), where
/// u_c is the unit centered class axis and R rotates each class axis c toward
/// the unused axis n_labels + c by `readout_rotation` radians.
struct SynthConfig {
  std::size_t dim = 64;
  std::size_t n_labels = 2;
  std::size_t k_shots = 16;
  std::size_t n_test = 500;
  double class_sep = 1.0;
  double variant_noise = 0.3;
  double cluster_noise = 1.0;
  double readout_bias = 0.0;
  double readout_rotation = 0.0;
  double readout_gain = 4.0;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

SynthConfig noiseless_preset();
SynthConfig chance_preset();
/// Miscalibrated readout over well-separated embeddings.
SynthConfig biased_plm_preset();

/// Train (K per class), dev (K per class), and test (n_test, class-balanced
/// round robin) splits; every instance has K variants. Deterministic in seed.
Dataset generate(const SynthConfig& config);

/// Pairs of instances with different labels sharing one raw location; only
/// the last coordinate (offset by +-label_offset) tells them apart.
/// Logits are uninformative (all zero).
struct CoincidentConfig {
  std::size_t dim = 3;
  std::size_t k_shots = 16;
  std::size_t n_test = 64;
  double location_spread = 1.0;
  double label_offset = 0.1;
  double variant_noise = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset generate_coincident(const CoincidentConfig& config);

/// Accuracy of classifying each labeled test instance's mean-of-variants
/// embedding by the nearest train-class centroid.
double centroid_oracle(const Dataset& dataset);

}  // namespace knnc
