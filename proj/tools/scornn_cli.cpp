// scornn: experiment CLI.
//
//   scornn run --preset copying [--config FILE] [--hidden 32 ...]
//   scornn gradcheck --hidden 6 --length 3 --seeds 5
//   scornn orthodrift --n 128 --steps 10000 --precision single --output drift.csv
//   scornn eval --preset adding --checkpoint runs/adding/checkpoint.bin
//
// Exit status: 0 success, 1 check failed, 2 bad configuration, 3 run diverged.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "scornn/checkpoint.hpp"
#include "scornn/harness.hpp"
#include "scornn/tasks.hpp"

namespace {

using namespace scornn;

const char* const kConfigKeys[] = {
    "task", "model", "hidden", "rho", "length", "batch_size", "iterations", "epochs",
    "train_size", "test_size", "optimizer_in_out", "lr_in_out", "optimizer_recurrent",
    "lr_recurrent", "rmsprop_decay", "adam_beta1", "adam_beta2", "epsilon",
    "lstm_forget_bias", "seed", "precision", "output_dir", "mnist_dir",
    "permutation_seed", "eval_every", "hidden_norm_every", "early_stop_below", "resume"};

/// Config sources for `run` and `eval`, applied in order: preset, file,
/// then individual flags.
struct ConfigFlags {
  std::string preset;
  std::string file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "Start from a named preset");
    app->add_option("--config", file, "key = value config file");
    for (const char* key : kConfigKeys) {
      std::string flag = key;
      for (char& c : flag)
        if (c == '_') c = '-';
      app->add_option("--" + flag, overrides[key], std::string("Set ") + key);
    }
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg = preset.empty() ? ExperimentConfig{} : scornn::preset(preset);
    if (!file.empty()) cfg = load_config(file, cfg);
    for (const auto& [key, value] : overrides)
      if (!value.empty()) apply_setting(cfg, key, value);
    return cfg;
  }
};

int cmd_run(const ConfigFlags& flags) {
  const ExperimentConfig cfg = flags.build();
  const RunSummary s = run(cfg, &std::cout);
  std::cout << "finished: " << s.iterations << " iterations, " << s.epochs << " epochs"
            << (s.stopped_early ? " (early stop)" : "") << "\n";
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint) {
  const ExperimentConfig cfg = flags.build();
  const MetricsRow r = evaluate_checkpoint(cfg, checkpoint);
  std::cout << kMetricsHeader << "\n"
            << "iteration,epoch,train_loss,eval_loss,eval_accuracy,orthogonality,wall_seconds\n"
            << format_metrics_row(r) << "\n";
  return 0;
}

int cmd_gradcheck(GradcheckOptions opts, std::size_t seeds, double tolerance) {
  bool ok = true;
  const std::uint64_t first = opts.seed;
  for (std::uint64_t s = first; s < first + seeds; ++s) {
    opts.seed = s;
    for (const GradcheckGroup& g : gradcheck(opts)) {
      const bool pass = g.max_rel_error < tolerance;
      ok = ok && pass;
      std::printf("seed %llu  %-18s entries %4zu  max_rel_error %.3e  %s\n",
                  static_cast<unsigned long long>(s), g.name.c_str(), g.entries,
                  g.max_rel_error, pass ? "ok" : "FAIL");
    }
  }
  return ok ? 0 : 1;
}

int cmd_orthodrift(const OrthodriftOptions& opts, const std::string& output) {
  if (output.empty() || output == "-") {
    orthodrift(opts, &std::cout);
    return 0;
  }
  std::ofstream out(output);
  if (!out) throw ConfigError("cannot write " + output);
  const auto points = orthodrift(opts, &out);
  if (!points.empty()) {
    std::printf("step %zu: cayley %.3e, multiplicative %.3e\n", points.back().step,
                points.back().score_cayley, points.back().score_multiplicative);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scaled-Cayley orthogonal RNN experiments"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Train a model and write metrics");
  run_flags.attach(run_cmd);

  ConfigFlags eval_flags;
  std::string checkpoint;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test data");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  GradcheckOptions gc;
  std::string gc_model = "scornn";
  std::size_t gc_seeds = 1;
  double gc_tolerance = 1e-5;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc_cmd->add_option("--model", gc_model, "scornn or lstm");
  gc_cmd->add_option("--hidden", gc.hidden, "Hidden size");
  gc_cmd->add_option("--length", gc.length, "Sequence length");
  gc_cmd->add_option("--seed", gc.seed, "First seed");
  gc_cmd->add_option("--seeds", gc_seeds, "Number of consecutive seeds");
  gc_cmd->add_option("--step", gc.step, "Finite-difference step");
  gc_cmd->add_option("--tolerance", gc_tolerance, "Pass threshold on relative error");
  gc_cmd->add_flag("--corrupt-skew-sign", gc.corrupt_skew_sign,
                   "Negate the skew gradient (oracle self-test)");

  OrthodriftOptions od;
  std::string od_precision = "single";
  std::string od_output;
  auto* od_cmd = app.add_subcommand("orthodrift", "Orthogonality drift comparison");
  od_cmd->add_option("--n", od.n, "Matrix order");
  od_cmd->add_option("--steps", od.steps, "Number of updates");
  od_cmd->add_option("--precision", od_precision, "single, double or extended");
  od_cmd->add_option("--seed", od.seed, "Seed for the gradient stream");
  od_cmd->add_option("--lr", od.learning_rate, "Learning rate for both schemes");
  od_cmd->add_option("--output", od_output, "CSV path (default stdout)");

  auto* presets_cmd = app.add_subcommand("presets", "List preset names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run_flags);
    if (*eval_cmd) return cmd_eval(eval_flags, checkpoint);
    if (*gc_cmd) {
      gc.model = gc_model == "lstm" ? ModelKind::Lstm : ModelKind::Scornn;
      if (gc_model != "lstm" && gc_model != "scornn") {
        throw ConfigError("unknown model '" + gc_model + "'");
      }
      return cmd_gradcheck(gc, gc_seeds, gc_tolerance);
    }
    if (*od_cmd) {
      od.precision = parse_precision(od_precision);
      return cmd_orthodrift(od, od_output);
    }
    if (*presets_cmd) {
      for (const std::string& name : preset_names()) std::cout << name << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingDiverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
