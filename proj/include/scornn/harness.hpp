#pragma once

// Experiment driver behind the `scornn` CLI: configuration, the training
// loop with metrics and checkpoints, finite-difference gradient checks and
// the orthogonality drift comparison.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scornn/optim.hpp"
#include "scornn/tasks.hpp"

namespace scornn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run stopped because the loss or a gradient went non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { Copying, Adding, Mnist, MnistPermuted };
enum class ModelKind { Scornn, Lstm };

std::string_view to_string(TaskKind task);
std::string_view to_string(ModelKind model);

/// Environment variable naming the directory that holds the MNIST IDX files.
inline constexpr const char* kDataRootEnv = "SCORNN_DATA_ROOT";

struct ExperimentConfig {
  TaskKind task = TaskKind::Copying;
  ModelKind model = ModelKind::Scornn;
  std::size_t hidden = 64;
  std::optional<std::size_t> rho;  // unset: task default
  std::size_t length = 200;        // T for copying/adding
  std::size_t batch_size = 128;
  std::size_t iterations = 2000;   // copying
  std::size_t epochs = 10;         // adding, MNIST
  std::size_t train_size = 100000;
  std::size_t test_size = 10000;
  OptimizerSettings in_out{OptimizerKind::Rmsprop, 1e-3};
  OptimizerSettings recurrent{OptimizerKind::Rmsprop, 1e-4};
  double lstm_forget_bias = 1.0;
  std::uint64_t seed = 1;
  std::string precision = "double";
  std::filesystem::path output_dir = "runs/default";
  std::filesystem::path mnist_dir;
  std::uint64_t permutation_seed = 1;
  std::size_t eval_every = 100;       // iterations, copying only
  std::size_t hidden_norm_every = 0;  // iterations; 0 disables
  /// Stop after an evaluation whose loss is below this; 0 disables.
  double early_stop_below = 0;
  bool resume = false;

  std::size_t effective_rho() const;
  bool epoch_based() const { return task != TaskKind::Copying; }
};

/// Applies one `key = value` setting. Unknown keys and malformed values throw
/// ConfigError naming the key.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Flat text file of `key = value` lines; `#` starts a comment.
ExperimentConfig load_config(const std::filesystem::path& path,
                             ExperimentConfig base = {});

/// Every key in a stable order, readable back by load_config.
std::string dump_config(const ExperimentConfig& cfg);

/// Named desk-scale configurations, one per benchmark.
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Checks sizes, rho <= n, the precision tag against the build, and that
/// dataset files exist. Throws ConfigError.
void validate(const ExperimentConfig& cfg);

/// MNIST directory: `mnist_dir` if set, else $SCORNN_DATA_ROOT/mnist, else
/// $SCORNN_DATA_ROOT.
std::filesystem::path resolve_mnist_dir(const ExperimentConfig& cfg);

inline constexpr std::string_view kMetricsHeader = "# scornn-metrics v1";

struct MetricsRow {
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  std::optional<double> train_loss;
  double eval_loss = 0;
  std::optional<double> eval_accuracy;
  std::optional<double> orthogonality;
  double wall_seconds = 0;
};

std::string format_metrics_row(const MetricsRow& row);

struct RunSummary {
  std::vector<MetricsRow> rows;  // rows written by this invocation
  std::uint64_t iterations = 0;
  std::uint64_t epochs = 0;
  bool stopped_early = false;
};

/// Trains to completion. Writes metrics.csv, config.txt, checkpoint.bin and,
/// when requested, hidden_norms.csv under cfg.output_dir.
RunSummary run(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Re-evaluates a checkpoint on the task's test data.
MetricsRow evaluate_checkpoint(const ExperimentConfig& cfg,
                               const std::filesystem::path& checkpoint);

struct GradcheckOptions {
  ModelKind model = ModelKind::Scornn;
  std::size_t hidden = 6;
  std::size_t length = 3;
  std::uint64_t seed = 1;
  double step = 1e-6;
  /// Negates the skew gradient before comparison (oracle self-test).
  bool corrupt_skew_sign = false;
};

struct GradcheckGroup {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0;
};

/// Central differences over every scalar parameter of a small random model
/// with a per-step cross-entropy loss. Relative error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-4); the floor keeps
/// entries whose true derivative is ~0 from dividing noise by noise.
std::vector<GradcheckGroup> gradcheck(const GradcheckOptions& opts);

enum class Precision { Single, Double, Extended };

Precision parse_precision(std::string_view name);
std::string_view to_string(Precision p);

struct OrthodriftOptions {
  std::size_t n = 128;
  std::size_t steps = 10000;
  Precision precision = Precision::Single;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
};

struct DriftPoint {
  std::size_t step = 0;
  double score_cayley = 0;
  double score_multiplicative = 0;
};

/// Runs the scaled-Cayley path (grad_skew + RMSprop on A) and the
/// multiplicative update side by side on the same stream of random dL/dW,
/// recording ‖WᵀW - I‖_F for both after every step. When `csv` is given the
/// curve is also written there.
std::vector<DriftPoint> orthodrift(const OrthodriftOptions& opts,
                                   std::ostream* csv = nullptr);

inline constexpr std::string_view kDriftHeader =
    "step,score_cayley,score_multiplicative,precision";

}  // namespace scornn
