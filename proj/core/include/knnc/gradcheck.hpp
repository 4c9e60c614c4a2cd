#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "knnc/types.hpp"

namespace knnc {

/// Finite-difference audit of the ANS and FR loss gradients at random
/// initializations. Shapes come from `hp` (k_max, ans_hidden, z_dim, k, tau);
/// the random problems are fixed: 16 ANS rows over 2 labels, and an FR batch
/// of 8 queries against a 40-point store in 8 input dimensions.
struct GradientCheckResult {
  std::vector<double> ans_errors;  // max relative error per initialization
  std::vector<double> fr_errors;
  double max_ans() const;
  double max_fr() const;
};

GradientCheckResult run_gradient_checks(const Hyperparams& hp, std::size_t inits, std::uint64_t seed);

}  // namespace knnc
