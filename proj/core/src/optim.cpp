#include "knnc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knnc/error.hpp"
#include "knnc/rng.hpp"

namespace knnc {

void ParamVector::add_tensor(std::string name, std::vector<std::size_t> shape) {
  for (const auto& t : manifest_) {
    if (t.name == name) fail(ErrorCode::kInvalidInput, "duplicate tensor '" + name + "'");
  }
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  manifest_.push_back({std::move(name), std::move(shape), values_.size(), count});
  values_.resize(values_.size() + count, 0.0);
}

const ParamVector::Tensor& ParamVector::tensor_info(std::string_view name) const {
  for (const auto& t : manifest_) {
    if (t.name == name) return t;
  }
  fail(ErrorCode::kInvalidInput, "no tensor named '" + std::string(name) + "'");
}

std::span<double> ParamVector::tensor(std::string_view name) {
  const auto& t = tensor_info(name);
  return std::span<double>(values_).subspan(t.offset, t.size);
}

std::span<const double> ParamVector::tensor(std::string_view name) const {
  const auto& t = tensor_info(name);
  return std::span<const double>(values_).subspan(t.offset, t.size);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorCode::kDimensionMismatch, "Adam parameter/gradient/state lengths differ");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

double cross_entropy(const Distribution& pred, std::size_t gold) {
  if (gold >= pred.size()) fail(ErrorCode::kInvalidInput, "gold label out of range");
  return -std::log(std::max(pred[gold], kProbabilityFloor));
}

double finite_diff_check(const ScalarObjective& loss, std::span<const double> params,
                         std::span<const double> analytic, const FiniteDiffOptions& options) {
  if (analytic.size() != params.size()) {
    fail(ErrorCode::kDimensionMismatch, "analytic gradient length differs from parameter count");
  }
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords > 0 && options.max_coords < coords.size()) {
    Rng rng(options.seed);
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  std::vector<double> probe(params.begin(), params.end());
  auto evaluate = [&]() {
    const double value = loss(probe);
    if (!std::isfinite(value)) fail(ErrorCode::kNumerical, "objective is not finite at a probe point");
    return value;
  };

  auto relative_error = [&](std::size_t i, double step) {
    const double original = probe[i];
    probe[i] = original + step;
    const double plus = evaluate();
    probe[i] = original - step;
    const double minus = evaluate();
    probe[i] = original;
    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    return std::abs(numeric - analytic[i]) / denom;
  };

  double worst = 0.0;
  for (std::size_t i : coords) {
    double err = relative_error(i, options.step);
    if (options.retry_step > 0.0 && err > 0.0) err = std::min(err, relative_error(i, options.retry_step));
    worst = std::max(worst, err);
  }
  return worst;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_rows, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) fail(ErrorCode::kInvalidConfig, "batch size must be positive");
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n_rows; start += batch_size) {
    const std::size_t stop = std::min(n_rows, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

TrainingCurve train_adam(ParamVector& params, std::size_t n_rows, const TrainSchedule& schedule, Rng& rng,
                         const BatchObjective& objective) {
  if (n_rows == 0) fail(ErrorCode::kInvalidInput, "no training rows");
  TrainingCurve curve;
  std::vector<double> grad(params.size(), 0.0);

  std::vector<std::size_t> all(n_rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  curve.initial_loss = objective(params.values(), all, grad);

  AdamState state(params.size());
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    double total = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : epoch_batches(n_rows, schedule.batch_size, rng)) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = objective(params.values(), batch, grad);
      total += loss * static_cast<double>(batch.size());
      seen += batch.size();
      adam_step(params.values(), grad, state, schedule.lr);
    }
    curve.epoch_losses.push_back(total / static_cast<double>(seen));
  }
  return curve;
}

void init_uniform_fan_in(ParamVector& params, std::string_view name, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& w : params.tensor(name)) w = rng.uniform(-bound, bound);
}

}  // namespace knnc
