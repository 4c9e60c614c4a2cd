// knnc: generate synthetic representation files, train, tune, evaluate, and
// ablate nearest-neighbor calibration from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <knnc/gradcheck.hpp>
#include <knnc/knnc.hpp>

namespace {

namespace fs = std::filesystem;
using namespace knnc;

struct GlobalFlags {
  Hyperparams hp;
  std::string ensemble = "mean-prob";
  std::string fr_objective = "top-k";
};

void add_global_flags(CLI::App& app, GlobalFlags& g) {
  app.add_option("--seed", g.hp.seed, "Base seed; run r uses a seed derived from it")->capture_default_str();
  app.add_option("--tau", g.hp.tau, "kNN temperature")->capture_default_str();
  app.add_option("--k", g.hp.k, "Neighbors for the kNN distribution")->capture_default_str();
  app.add_option("--kmax", g.hp.k_max, "Largest ANS neighbor count (multiple of 4)")->capture_default_str();
  app.add_option("--lambda", g.hp.lambda, "Fixed interpolation weight when not tuned")->capture_default_str();
  app.add_option("--z-dim", g.hp.z_dim, "FR output dimension")->capture_default_str();
  app.add_option("--ans-hidden", g.hp.ans_hidden, "ANS hidden width")->capture_default_str();
  app.add_option("--lr", g.hp.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--batch-size", g.hp.batch_size, "Minibatch size")->capture_default_str();
  app.add_option("--epochs", g.hp.epochs, "Training epochs")->capture_default_str();
  app.add_option("--ensemble", g.ensemble, "Variant ensemble rule")
      ->check(CLI::IsMember({"mean-prob", "mean-logprob"}))
      ->capture_default_str();
  app.add_option("--fr-objective", g.fr_objective, "FR training objective")
      ->check(CLI::IsMember({"top-k", "full-store"}))
      ->capture_default_str();
  app.add_flag("--ans-standardize", g.hp.ans_standardize_features, "Standardize ANS input features");
  app.set_config("--config", "", "Read flags from a TOML/INI file");
}

Hyperparams resolve(const GlobalFlags& g) {
  Hyperparams hp = g.hp;
  hp.ensemble = g.ensemble == "mean-logprob" ? EnsembleRule::kMeanLogProbability : EnsembleRule::kMeanProbability;
  hp.fr_objective = g.fr_objective == "full-store" ? FrObjective::kFullStore : FrObjective::kTopK;
  hp.validate();
  return hp;
}

// ---------------------------------------------------------------------------
// gen-synth

struct SynthFlags {
  std::string preset = "default";
  std::string out;
  std::optional<std::size_t> dim, labels, k_shots, n_test;
  std::optional<double> class_sep, variant_noise, cluster_noise, readout_bias, readout_rotation, readout_gain;
  std::optional<double> location_spread, label_offset;
};

template <class T>
void override_if(const std::optional<T>& v, T& field) {
  if (v) field = *v;
}

void gen_synth(const SynthFlags& f, std::uint64_t seed) {
  Dataset ds;
  if (f.preset == "coincident") {
    if (f.labels || f.class_sep || f.cluster_noise || f.readout_bias || f.readout_rotation || f.readout_gain) {
      fail(ErrorCode::kInvalidConfig, "the coincident preset takes only --dim, --k-shots, --n-test, "
                                      "--variant-noise, --location-spread, --label-offset");
    }
    CoincidentConfig c;
    override_if(f.dim, c.dim);
    override_if(f.k_shots, c.k_shots);
    override_if(f.n_test, c.n_test);
    override_if(f.variant_noise, c.variant_noise);
    override_if(f.location_spread, c.location_spread);
    override_if(f.label_offset, c.label_offset);
    c.seed = seed;
    ds = generate_coincident(c);
  } else {
    if (f.location_spread || f.label_offset) {
      fail(ErrorCode::kInvalidConfig, "--location-spread and --label-offset apply to the coincident preset only");
    }
    SynthConfig c = f.preset == "noiseless"    ? noiseless_preset()
                    : f.preset == "chance"     ? chance_preset()
                    : f.preset == "biased-plm" ? biased_plm_preset()
                                               : SynthConfig{};
    override_if(f.dim, c.dim);
    override_if(f.labels, c.n_labels);
    override_if(f.k_shots, c.k_shots);
    override_if(f.n_test, c.n_test);
    override_if(f.class_sep, c.class_sep);
    override_if(f.variant_noise, c.variant_noise);
    override_if(f.cluster_noise, c.cluster_noise);
    override_if(f.readout_bias, c.readout_bias);
    override_if(f.readout_rotation, c.readout_rotation);
    override_if(f.readout_gain, c.readout_gain);
    c.seed = seed;
    ds = generate(c);
  }
  save_representations(f.out, ds);
  std::size_t n_train = 0, n_dev = 0, n_test = 0;
  for (const auto& inst : ds.instances) {
    n_train += inst.split == Split::kTrain;
    n_dev += inst.split == Split::kDev;
    n_test += inst.split == Split::kTest;
  }
  std::cout << "wrote " << f.out << ": dim " << ds.dim << ", " << ds.label_space.size() << " labels, K " << ds.k_shots
            << ", train/dev/test " << n_train << "/" << n_dev << "/" << n_test << " instances\n";
}

// ---------------------------------------------------------------------------
// tune

struct TuneFlags {
  std::string data;
  std::string fr;
  std::vector<double> lambdas, taus;
  std::vector<std::size_t> ks;
};

void tune(const TuneFlags& f, const Hyperparams& hp) {
  const Dataset ds = load_representations(f.data);
  std::optional<FrCheckpoint> fr;
  if (!f.fr.empty()) fr = load_fr_checkpoint(f.fr);
  const EmbeddingTransform* t = fr ? &fr->model : nullptr;
  const Datastore store = build_datastore(ds, in_split(Split::kTrain), t);

  TuningGrid grid;
  if (!f.lambdas.empty()) grid.lambdas = f.lambdas;
  grid.taus = f.taus;
  grid.ks = f.ks;
  const TunedParams best = tune_lambda(ds.split(Split::kDev), store, hp, grid, t);
  std::cout << "lambda\ttau\tk\tdev_accuracy\n"
            << format_double(best.lambda) << '\t' << format_double(best.tau) << '\t' << best.k << '\t'
            << format_double(best.dev_accuracy) << '\n';
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  std::string data;
  std::string out_dir;
  std::string method = "knn-c";
};

void print_curve(const char* name, const TrainingCurve& c) {
  std::printf("%s loss: initial %.6f, final epoch %.6f (%zu epochs)\n", name, c.initial_loss,
              c.epoch_losses.empty() ? c.initial_loss : c.epoch_losses.back(), c.epoch_losses.size());
}

void train(const TrainFlags& f, const Hyperparams& hp) {
  const MethodMode mode = parse_method(f.method);
  if (mode != MethodMode::kKnnC && mode != MethodMode::kMinusAns && mode != MethodMode::kMinusFr) {
    fail(ErrorCode::kInvalidConfig, "train needs a method with a trained module: knn-c, minus-ans, or minus-fr");
  }
  const Dataset ds = load_representations(f.data);
  const PipelineResult r = run_pipeline(ds, hp, mode);
  fs::create_directories(f.out_dir);
  if (r.fr) {
    const fs::path p = fs::path(f.out_dir) / "fr.ckpt";
    save_checkpoint(p, *r.fr, hp);
    print_curve("FR", *r.fr_curve);
    std::cout << "wrote " << p.string() << '\n';
  }
  if (r.ans) {
    const fs::path p = fs::path(f.out_dir) / "ans.ckpt";
    save_checkpoint(p, *r.ans, hp);
    print_curve("ANS", *r.ans_curve);
    std::cout << "wrote " << p.string() << '\n';
  }
  std::cout << method_label(mode) << " test accuracy " << format_double(r.test_accuracy) << '\n';
}

// ---------------------------------------------------------------------------
// eval / ablate

struct EvalFlags {
  std::string data;
  std::vector<std::string> modes;
  std::size_t runs = 5;
  std::size_t workers = 0;
  std::string fr;
  std::string ans;
  std::string report;
};

void evaluate(const EvalFlags& f, Hyperparams hp, std::span<const MethodMode> modes) {
  const Dataset ds = load_representations(f.data);
  if (f.runs == 0) fail(ErrorCode::kInvalidConfig, "--runs must be positive");

  std::optional<FrCheckpoint> fr;
  std::optional<AnsCheckpoint> ans;
  EvaluationOptions opts;
  opts.runs = f.runs;
  opts.workers = f.workers;
  if (!f.fr.empty()) {
    fr = load_fr_checkpoint(f.fr);
    opts.pipeline.fr = &fr->model;
  }
  if (!f.ans.empty()) {
    ans = load_ans_checkpoint(f.ans);
    hp.k_max = ans->model.k_max;
    opts.pipeline.ans = &ans->model;
  }

  const RunReport report = evaluate_methods(ds, hp, modes, opts);
  write_report_table(std::cout, report);
  if (f.report.empty()) {
    std::cout << '\n';
    write_report_tsv(std::cout, report);
  } else {
    std::ofstream out(f.report, std::ios::binary);
    if (!out) fail(ErrorCode::kInvalidInput, "cannot write report '" + f.report + "'");
    write_report_tsv(out, report);
    if (!out) fail(ErrorCode::kInvalidInput, "failed writing report '" + f.report + "'");
  }
}

// ---------------------------------------------------------------------------
// check-gradients

struct GradFlags {
  std::size_t inits = 20;
  double tol = 1e-4;
};

bool check_gradients(const GradFlags& f, const Hyperparams& hp) {
  const GradientCheckResult r = run_gradient_checks(hp, f.inits, hp.seed);
  std::printf("module\tinits\tmax_rel_error\tstatus\n");
  std::printf("ANS\t%zu\t%.3e\t%s\n", r.ans_errors.size(), r.max_ans(), r.max_ans() < f.tol ? "ok" : "FAIL");
  std::printf("FR\t%zu\t%.3e\t%s\n", r.fr_errors.size(), r.max_fr(), r.max_fr() < f.tol ? "ok" : "FAIL");
  return r.max_ans() < f.tol && r.max_fr() < f.tol;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nearest-neighbor calibration of in-context-learning predictions"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags global;
  add_global_flags(app, global);
  const std::string method_help = "Method: icl, knn-c, minus-ans, minus-fr, minus-ans-fr, knn-only";

  SynthFlags synth;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic representation file");
  gen->add_option("--preset", synth.preset, "Starting configuration")
      ->check(CLI::IsMember({"default", "noiseless", "chance", "biased-plm", "coincident"}))
      ->capture_default_str();
  gen->add_option("--out", synth.out, "Output JSON Lines file")->required();
  gen->add_option("--dim", synth.dim, "Representation dimension");
  gen->add_option("--labels", synth.labels, "Number of labels");
  gen->add_option("--k-shots", synth.k_shots, "Shots per class");
  gen->add_option("--n-test", synth.n_test, "Test instances");
  gen->add_option("--class-sep", synth.class_sep, "Distance between class means");
  gen->add_option("--variant-noise", synth.variant_noise, "Per-variant noise (RMS norm)");
  gen->add_option("--cluster-noise", synth.cluster_noise, "Per-instance noise (RMS norm)");
  gen->add_option("--readout-bias", synth.readout_bias, "Logit bias toward label 0");
  gen->add_option("--readout-rotation", synth.readout_rotation, "Readout rotation in radians");
  gen->add_option("--readout-gain", synth.readout_gain, "Readout logit scale");
  gen->add_option("--location-spread", synth.location_spread, "Coincident preset: spread of shared locations");
  gen->add_option("--label-offset", synth.label_offset, "Coincident preset: label offset on the last axis");

  TuneFlags tune_flags;
  auto* tune_cmd = app.add_subcommand("tune", "Dev-set grid search of lambda (and optionally tau, k)");
  tune_cmd->add_option("--data", tune_flags.data, "Representation file")->required()->check(CLI::ExistingFile);
  tune_cmd->add_option("--fr", tune_flags.fr, "FR checkpoint; tune in its projected space")
      ->check(CLI::ExistingFile);
  tune_cmd->add_option("--lambda-grid", tune_flags.lambdas, "Comma-separated lambdas")->delimiter(',');
  tune_cmd->add_option("--tau-grid", tune_flags.taus, "Comma-separated taus")->delimiter(',');
  tune_cmd->add_option("--k-grid", tune_flags.ks, "Comma-separated neighbor counts")->delimiter(',');

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train FR and/or ANS and write checkpoints");
  train_cmd->add_option("--data", train_flags.data, "Representation file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out-dir", train_flags.out_dir, "Directory for fr.ckpt / ans.ckpt")->required();
  train_cmd->add_option("--method", train_flags.method, method_help)->capture_default_str();

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate methods over seeded runs");
  auto* ablate_cmd = app.add_subcommand("ablate", "Evaluate all six method rows");
  for (auto* cmd : {eval_cmd, ablate_cmd}) {
    cmd->add_option("--data", eval_flags.data, "Representation file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--runs", eval_flags.runs, "Seeded runs per method")->capture_default_str();
    cmd->add_option("--workers", eval_flags.workers, "Parallel workers (0: all cores)")->capture_default_str();
    cmd->add_option("--fr", eval_flags.fr, "Use this FR checkpoint instead of training")->check(CLI::ExistingFile);
    cmd->add_option("--ans", eval_flags.ans, "Use this ANS checkpoint instead of training")
        ->check(CLI::ExistingFile);
    cmd->add_option("--report", eval_flags.report, "Write the tab-separated report here");
  }
  eval_cmd->add_option("--mode", eval_flags.modes, method_help + " (repeatable; default knn-c)");

  GradFlags grad_flags;
  auto* grad_cmd = app.add_subcommand("check-gradients", "Finite-difference check of the ANS and FR gradients");
  grad_cmd->add_option("--inits", grad_flags.inits, "Random initializations per module")->capture_default_str();
  grad_cmd->add_option("--tol", grad_flags.tol, "Maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const Hyperparams hp = resolve(global);
    if (*gen) {
      gen_synth(synth, hp.seed);
    } else if (*tune_cmd) {
      tune(tune_flags, hp);
    } else if (*train_cmd) {
      train(train_flags, hp);
    } else if (*eval_cmd) {
      std::vector<MethodMode> modes;
      for (const auto& m : eval_flags.modes) modes.push_back(parse_method(m));
      if (modes.empty()) modes.push_back(MethodMode::kKnnC);
      evaluate(eval_flags, hp, modes);
    } else if (*ablate_cmd) {
      evaluate(eval_flags, hp, kAllMethods);
    } else if (*grad_cmd) {
      if (!check_gradients(grad_flags, hp)) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "knnc: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
