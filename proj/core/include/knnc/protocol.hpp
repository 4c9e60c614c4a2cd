#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knnc/ans.hpp"
#include "knnc/calibrate.hpp"
#include "knnc/datastore.hpp"
#include "knnc/fr.hpp"
#include "knnc/optim.hpp"
#include "knnc/types.hpp"

namespace knnc {

/// Evaluated methods: the full model and its ablations.
enum class MethodMode {
  kIcl,          // base model ensemble only
  kKnnC,         // FR + ANS
  kMinusAns,     // FR + dev-tuned fixed lambda
  kMinusFr,      // ANS on raw representations
  kMinusAnsFr,   // dev-tuned fixed lambda on raw representations
  kKnnOnly,      // kNN distribution on raw representations, no base model
};

inline constexpr MethodMode kAllMethods[] = {MethodMode::kIcl,     MethodMode::kKnnC,       MethodMode::kMinusAns,
                                             MethodMode::kMinusFr, MethodMode::kMinusAnsFr, MethodMode::kKnnOnly};

/// Row label as printed in reports, e.g. "KNN-C" or "-ANS,FR,p_L".
std::string_view method_label(MethodMode mode);
/// Command-line token, e.g. "knn-c" or "minus-ans-fr".
std::string_view method_token(MethodMode mode);
/// Accepts either the token or the label. Throws InvalidConfig.
MethodMode parse_method(std::string_view text);

struct HalfSplit {
  std::vector<Instance> a;
  std::vector<Instance> b;
};

/// Per-class random halves of the train split (file order kept within each
/// half). Throws SplitError when a class has an odd count.
HalfSplit stratified_half_split(std::span<const Instance> train, std::size_t n_labels, std::uint64_t seed);
HalfSplit stratified_half_split(const Dataset& dataset, std::uint64_t seed);

struct TuningGrid {
  std::vector<double> lambdas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> taus;      // empty: hp.tau only
  std::vector<std::size_t> ks;   // empty: hp.k only
};

struct TunedParams {
  double lambda = 0.0;
  double tau = 0.0;
  std::size_t k = 0;
  double dev_accuracy = 0.0;
};

/// Grid search of fixed-lambda dev accuracy. Candidates are visited tau-major,
/// then k, then ascending lambda; only strict improvements replace the
/// incumbent, so ties resolve to the earliest (smallest lambda) candidate.
TunedParams tune_lambda(std::span<const Instance> dev, const Datastore& store, const Hyperparams& hp,
                        const TuningGrid& grid = {}, const EmbeddingTransform* transform = nullptr);

struct RunStats {
  double avg = 0.0;
  double worst = 0.0;
  double std_dev = 0.0;  // sample (n - 1); 0 when n == 1
};

RunStats aggregate_runs(std::span<const double> accuracies);

/// Fraction of labeled instances whose ensembled argmax matches the label.
double accuracy(std::span<const Instance> instances, const Datastore& store, const Hyperparams& hp,
                const PredictContext& context);

struct PipelineOptions {
  TuningGrid grid;
  /// Pre-trained models; when set the corresponding training stage is skipped.
  const FrModel* fr = nullptr;
  const AnsModel* ans = nullptr;
};

struct PipelineResult {
  MethodMode mode = MethodMode::kIcl;
  double test_accuracy = 0.0;
  std::vector<std::size_t> predictions;  // argmax per test instance, file order
  std::optional<double> lambda;          // set for fixed-lambda methods
  std::optional<double> tau;             // unset for ICL
  std::optional<std::size_t> k;          // neighbor depth; unset for ICL
  std::optional<FrModel> fr;
  std::optional<AnsModel> ans;
  std::optional<TrainingCurve> fr_curve;
  std::optional<TrainingCurve> ans_curve;
};

/// Train (as the method requires) and evaluate on the test split.
///
/// For the full model: FR is trained with store = half A, queries = half B;
/// ANS with store = FR(half B), queries = half A; inference uses FR(full
/// train). Ablations drop the corresponding stage.
PipelineResult run_pipeline(const Dataset& dataset, const Hyperparams& hp, MethodMode mode,
                            const PipelineOptions& options = {});

struct MethodReport {
  MethodMode mode = MethodMode::kIcl;
  RunStats stats;
  std::vector<double> accuracies;
  std::vector<std::optional<double>> lambdas;
  std::vector<std::optional<double>> taus;
  std::vector<std::optional<std::size_t>> ks;
};

struct RunReport {
  std::vector<MethodReport> rows;
};

struct EvaluationOptions {
  std::size_t runs = 5;
  std::size_t workers = 0;  // 0: hardware concurrency
  PipelineOptions pipeline;
};

/// Run r of every method uses seed derive_seed(hp.seed, r). Jobs run in
/// parallel; results are assembled in (method, run) order.
RunReport evaluate_methods(const Dataset& dataset, const Hyperparams& hp, std::span<const MethodMode> modes,
                           const EvaluationOptions& options = {});

}  // namespace knnc
