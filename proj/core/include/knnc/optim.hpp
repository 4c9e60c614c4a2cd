#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knnc/types.hpp"

namespace knnc {

class Rng;

/// Flat f64 parameter storage with a manifest of named tensors. Tensor
/// slices are contiguous, disjoint, and cover the array in declaration order.
class ParamVector {
 public:
  struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;

    bool operator==(const Tensor&) const = default;
  };

  ParamVector() = default;

  /// Appends a zero-filled tensor; names must be unique.
  void add_tensor(std::string name, std::vector<std::size_t> shape);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  const std::vector<Tensor>& manifest() const noexcept { return manifest_; }
  const Tensor& tensor_info(std::string_view name) const;
  std::span<double> tensor(std::string_view name);
  std::span<const double> tensor(std::string_view name) const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
  std::vector<Tensor> manifest_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update in place; increments `state.t`.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

/// -log(max(pred[gold], 1e-12)).
double cross_entropy(const Distribution& pred, std::size_t gold);

inline constexpr double kProbabilityFloor = 1e-12;

struct FiniteDiffOptions {
  double step = 1e-5;
  /// When positive, each coordinate is also probed at this step and the
  /// smaller of the two errors counts. A ReLU kink within `step` of the
  /// point spoils only the wide probe; roundoff spoils only the narrow one.
  double retry_step = 0.0;
  /// Check at most this many randomly chosen coordinates; 0 checks all.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

using ScalarObjective = std::function<double(std::span<const double>)>;

/// Central differences against `analytic`; returns
/// max_i |fd_i - an_i| / max(|fd_i|, |an_i|, 1e-8). Throws NumericalError
/// when the objective is non-finite at a probed point.
double finite_diff_check(const ScalarObjective& loss, std::span<const double> params,
                         std::span<const double> analytic, const FiniteDiffOptions& options = {});

/// A seeded permutation of [0, n_rows) cut into consecutive batches; the last
/// batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_rows, std::size_t batch_size, Rng& rng);

struct TrainSchedule {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
};

/// Mean loss over `rows` at the current parameters, accumulating the mean
/// gradient into `grad` (pre-zeroed, same length as the parameters).
using BatchObjective = std::function<double(std::span<const double> params, std::span<const std::size_t> rows,
                                            std::span<double> grad)>;

struct TrainingCurve {
  double initial_loss = 0.0;           // full-data loss before the first step
  std::vector<double> epoch_losses;    // mean of batch losses seen during each epoch
};

/// Minibatch Adam over every row once per epoch.
TrainingCurve train_adam(ParamVector& params, std::size_t n_rows, const TrainSchedule& schedule, Rng& rng,
                         const BatchObjective& objective);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for each listed tensor.
void init_uniform_fan_in(ParamVector& params, std::string_view name, std::size_t fan_in, Rng& rng);

}  // namespace knnc
