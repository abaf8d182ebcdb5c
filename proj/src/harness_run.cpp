#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <ostream>

#include "scornn/checkpoint.hpp"
#include "scornn/harness.hpp"
#include "scornn/lstm.hpp"
#include "scornn/network.hpp"
#include "scornn/stiefel.hpp"

namespace scornn {

namespace {

constexpr std::size_t kEvalChunk = 250;

// Stream ids for mix_seed; fixed so that runs are reproducible across builds.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

struct StepResult {
  double loss = 0;
  std::vector<Real> hidden_norms;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<Matrix> infer(const TaskBatch& batch) const = 0;
  virtual StepResult train(const TaskBatch& batch, bool capture_norms) = 0;
  virtual std::optional<double> orthogonality() const = 0;
  virtual Checkpoint snapshot() const = 0;
  /// Loads weights, and optimizer state when `with_optimizer` is set.
  virtual void restore(const Checkpoint& ck, bool with_optimizer) = 0;
};

double checked_loss(const BatchScore& score) {
  if (!std::isfinite(score.loss)) {
    throw TrainingDiverged("non-finite training loss");
  }
  return score.loss;
}

class ScoModel final : public Model {
 public:
  ScoModel(const ExperimentConfig& cfg, std::size_t in, std::size_t out, Rng& rng)
      : cell_(ScoCell::initialize(in, cfg.hidden, out, cfg.effective_rho(), rng)),
        opt_(cell_, cfg.in_out, cfg.recurrent) {}

  std::vector<Matrix> infer(const TaskBatch& batch) const override {
    return sco_forward(cell_, batch.inputs, output_mode(batch.loss)).outputs;
  }

  StepResult train(const TaskBatch& batch, bool capture) override {
    ForwardResult fr = sco_forward(cell_, batch.inputs, output_mode(batch.loss));
    const BatchScore score = score_outputs(batch, fr.outputs);
    StepResult r{checked_loss(score), {}};
    ScoGrads g = sco_backward(cell_, fr.tape, score.output_grads, capture);
    opt_.apply(cell_, g);
    r.hidden_norms = std::move(g.hidden_norms);
    return r;
  }

  std::optional<double> orthogonality() const override {
    return static_cast<double>(orthogonality_score(cell_.recurrent));
  }

  Checkpoint snapshot() const override { return capture(cell_, &opt_); }
  void restore(const Checkpoint& ck, bool with_optimizer) override {
    cell_ = restore_sco(ck, with_optimizer ? &opt_ : nullptr);
  }

 private:
  ScoCell cell_;
  ScoOptimizer opt_;
};

class LstmModel final : public Model {
 public:
  LstmModel(const ExperimentConfig& cfg, std::size_t in, std::size_t out, Rng& rng)
      : cell_(LstmCell::initialize(in, cfg.hidden, out,
                                   static_cast<Real>(cfg.lstm_forget_bias), rng)),
        opt_(cell_, cfg.in_out) {}

  std::vector<Matrix> infer(const TaskBatch& batch) const override {
    return lstm_forward(cell_, batch.inputs, output_mode(batch.loss)).outputs;
  }

  StepResult train(const TaskBatch& batch, bool capture) override {
    LstmForwardResult fr = lstm_forward(cell_, batch.inputs, output_mode(batch.loss));
    const BatchScore score = score_outputs(batch, fr.outputs);
    StepResult r{checked_loss(score), {}};
    LstmGrads g = lstm_backward(cell_, fr.tape, score.output_grads, capture);
    opt_.apply(cell_, g);
    r.hidden_norms = std::move(g.hidden_norms);
    return r;
  }

  std::optional<double> orthogonality() const override { return std::nullopt; }
  Checkpoint snapshot() const override { return capture(cell_, &opt_); }
  void restore(const Checkpoint& ck, bool with_optimizer) override {
    cell_ = restore_lstm(ck, with_optimizer ? &opt_ : nullptr);
  }

 private:
  LstmCell cell_;
  LstmOptimizer opt_;
};

/// Where batches come from. Copying is streamed (batch k is a function of the
/// seed and k); the other tasks are fixed datasets visited in epochs.
struct TaskData {
  std::size_t input_size = 0;
  std::size_t output_size = 0;
  std::size_t train_count = 0;
  std::function<TaskBatch(std::uint64_t)> stream;
  std::function<TaskBatch(std::span<const std::size_t>)> train;
  std::size_t test_count = 0;
  std::function<TaskBatch(std::span<const std::size_t>)> test;
};

TaskData make_task_data(const ExperimentConfig& cfg) {
  TaskData d;
  const std::uint64_t train_seed = mix_seed(cfg.seed, kTrainStream);
  const std::uint64_t test_seed = mix_seed(cfg.seed, kTestStream);
  switch (cfg.task) {
    case TaskKind::Copying: {
      d.input_size = d.output_size = kCopyingClasses;
      const std::size_t length = cfg.length;
      const std::size_t batch = cfg.batch_size;
      d.stream = [=](std::uint64_t k) {
        Rng rng(mix_seed(train_seed, k));
        return gen_copying(length, batch, rng);
      };
      // Test chunk c is generated from its own stream; indices are only
      // used for the chunk size and position.
      d.test_count = cfg.test_size;
      d.test = [=](std::span<const std::size_t> idx) {
        Rng rng(mix_seed(test_seed, idx.front() / kEvalChunk));
        return gen_copying(length, idx.size(), rng);
      };
      break;
    }
    case TaskKind::Adding: {
      d.input_size = 2;
      d.output_size = 1;
      auto train = std::make_shared<AddingDataset>(cfg.length, cfg.train_size, train_seed);
      auto test = std::make_shared<AddingDataset>(cfg.length, cfg.test_size, test_seed);
      d.train_count = cfg.train_size;
      d.test_count = cfg.test_size;
      d.train = [train](std::span<const std::size_t> idx) { return train->batch(idx); };
      d.test = [test](std::span<const std::size_t> idx) { return test->batch(idx); };
      break;
    }
    case TaskKind::Mnist:
    case TaskKind::MnistPermuted: {
      const auto dir = resolve_mnist_dir(cfg);
      MnistDataset full = load_mnist(dir / "train-images-idx3-ubyte",
                                     dir / "train-labels-idx1-ubyte");
      MnistDataset t10k = load_mnist(dir / "t10k-images-idx3-ubyte",
                                     dir / "t10k-labels-idx1-ubyte");
      if (cfg.train_size > full.count() || cfg.test_size > t10k.count()) {
        throw ConfigError("train_size/test_size exceed the MNIST files (" +
                          std::to_string(full.count()) + "/" +
                          std::to_string(t10k.count()) + ")");
      }
      auto train = std::make_shared<MnistDataset>(slice(full, 0, cfg.train_size));
      auto test = std::make_shared<MnistDataset>(slice(t10k, 0, cfg.test_size));
      if (cfg.task == TaskKind::MnistPermuted) {
        *train = apply_permutation(std::move(*train), cfg.permutation_seed);
        *test = apply_permutation(std::move(*test), cfg.permutation_seed);
      }
      d.input_size = 1;
      d.output_size = 10;
      d.train_count = train->count();
      d.test_count = test->count();
      d.train = [train](std::span<const std::size_t> idx) { return mnist_batch(*train, idx); };
      d.test = [test](std::span<const std::size_t> idx) { return mnist_batch(*test, idx); };
      break;
    }
  }
  return d;
}

struct EvalResult {
  double loss = 0;
  std::optional<double> accuracy;
};

EvalResult evaluate(const Model& model, const TaskData& data) {
  double loss_sum = 0;
  std::size_t loss_weight = 0;
  std::size_t correct = 0;
  std::size_t scored = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.test_count; begin += kEvalChunk) {
    const std::size_t end = std::min(data.test_count, begin + kEvalChunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const TaskBatch batch = data.test(idx);
    const BatchScore s = score_outputs(batch, model.infer(batch));
    // Losses are means over their own rows (times steps for per-step xent).
    const std::size_t weight = batch.loss == LossKind::PerStepCrossEntropy
                                   ? batch.length() * batch.batch_size()
                                   : batch.batch_size();
    loss_sum += s.loss * static_cast<double>(weight);
    loss_weight += weight;
    correct += s.correct;
    scored += s.scored;
  }
  EvalResult r;
  r.loss = loss_sum / static_cast<double>(loss_weight);
  if (scored > 0) r.accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  return r;
}

std::unique_ptr<Model> make_model(const ExperimentConfig& cfg, const TaskData& data) {
  Rng rng(mix_seed(cfg.seed, kInitStream));
  if (cfg.model == ModelKind::Scornn) {
    return std::make_unique<ScoModel>(cfg, data.input_size, data.output_size, rng);
  }
  return std::make_unique<LstmModel>(cfg, data.input_size, data.output_size, rng);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

constexpr std::string_view kMetricsColumns =
    "iteration,epoch,train_loss,eval_loss,eval_accuracy,orthogonality,wall_seconds";

class RunWriter {
 public:
  RunWriter(const ExperimentConfig& cfg, bool append, std::ostream* log)
      : dir_(cfg.output_dir), log_(log) {
    const auto mode = append ? std::ios::app : std::ios::trunc;
    metrics_.open(dir_ / "metrics.csv", std::ios::out | mode);
    if (!metrics_) throw ConfigError("cannot write " + (dir_ / "metrics.csv").string());
    if (!append) metrics_ << kMetricsHeader << '\n' << kMetricsColumns << '\n';
    if (cfg.hidden_norm_every > 0) {
      norms_.open(dir_ / "hidden_norms.csv", std::ios::out | mode);
      if (!append) norms_ << "# scornn-hidden-norms v1\niteration,t,norm\n";
    }
  }

  void row(const MetricsRow& r) {
    metrics_ << format_metrics_row(r) << '\n';
    metrics_.flush();
    if (log_) {
      *log_ << "iter " << r.iteration << " epoch " << r.epoch << " train "
            << fmt(r.train_loss) << " eval " << fmt(r.eval_loss);
      if (r.eval_accuracy) *log_ << " acc " << fmt(*r.eval_accuracy);
      if (r.orthogonality) *log_ << " ortho " << fmt(*r.orthogonality);
      *log_ << " (" << fmt(r.wall_seconds) << " s)" << std::endl;
    }
  }

  void norms(std::uint64_t iteration, const std::vector<Real>& values) {
    for (std::size_t t = 0; t < values.size(); ++t)
      norms_ << iteration << ',' << t + 1 << ',' << fmt(static_cast<double>(values[t])) << '\n';
    norms_.flush();
  }

 private:
  std::filesystem::path dir_;
  std::ostream* log_;
  std::ofstream metrics_;
  std::ofstream norms_;
};

}  // namespace

std::string format_metrics_row(const MetricsRow& row) {
  std::string s = std::to_string(row.iteration) + ',' + std::to_string(row.epoch) + ',' +
                  fmt(row.train_loss) + ',' + fmt(row.eval_loss) + ',' +
                  fmt(row.eval_accuracy) + ',' + fmt(row.orthogonality) + ',';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", row.wall_seconds);
  return s + buf;
}

RunSummary run(const ExperimentConfig& cfg, std::ostream* log) {
  validate(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  const TaskData data = make_task_data(cfg);
  std::unique_ptr<Model> model = make_model(cfg, data);

  const auto ck_path = cfg.output_dir / "checkpoint.bin";
  RunSummary summary;
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  const bool resumed = cfg.resume && std::filesystem::exists(ck_path);
  if (resumed) {
    const Checkpoint ck = read_checkpoint(ck_path);
    model->restore(ck, true);
    iteration = ck.iteration;
    epoch = ck.epoch;
  }
  {
    std::ofstream out(cfg.output_dir / "config.txt");
    out << dump_config(cfg);
  }
  RunWriter writer(cfg, resumed, log);
  const auto start = std::chrono::steady_clock::now();
  auto seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  double train_sum = 0;
  std::size_t train_count = 0;

  auto emit = [&](bool initial) {
    MetricsRow r;
    r.iteration = iteration;
    r.epoch = epoch;
    if (!initial && train_count > 0) r.train_loss = train_sum / static_cast<double>(train_count);
    const EvalResult e = evaluate(*model, data);
    r.eval_loss = e.loss;
    r.eval_accuracy = e.accuracy;
    r.orthogonality = model->orthogonality();
    r.wall_seconds = seconds();
    writer.row(r);
    summary.rows.push_back(r);
    Checkpoint ck = model->snapshot();
    ck.iteration = iteration;
    ck.epoch = epoch;
    ck.config = dump_config(cfg);
    write_checkpoint(ck_path, ck);
    train_sum = 0;
    train_count = 0;
    if (!std::isfinite(e.loss)) throw TrainingDiverged("non-finite evaluation loss");
    return cfg.early_stop_below > 0 && e.loss < cfg.early_stop_below;
  };

  auto step = [&](const TaskBatch& batch) {
    const bool capture = cfg.hidden_norm_every > 0 && (iteration + 1) % cfg.hidden_norm_every == 0;
    auto diverged = [&](const char* what) {
      MetricsRow diag;
      diag.iteration = iteration + 1;
      diag.epoch = epoch;
      diag.train_loss = std::nan("");
      diag.eval_loss = std::nan("");
      diag.wall_seconds = seconds();
      writer.row(diag);
      return TrainingDiverged(std::string(what) + " at iteration " +
                              std::to_string(iteration + 1));
    };
    StepResult r;
    try {
      r = model->train(batch, capture);
    } catch (const TrainingDiverged& ex) {
      throw diverged(ex.what());
    } catch (const NonFiniteGradientError& ex) {
      throw diverged(ex.what());
    }
    ++iteration;
    train_sum += r.loss;
    ++train_count;
    if (capture) writer.norms(iteration, r.hidden_norms);
  };

  if (!resumed && emit(true)) {
    summary.stopped_early = true;
  } else if (!cfg.epoch_based()) {
    while (iteration < cfg.iterations) {
      step(data.stream(iteration));
      if (iteration % cfg.eval_every == 0 || iteration == cfg.iterations) {
        if (emit(false)) {
          summary.stopped_early = true;
          break;
        }
      }
    }
  } else {
    std::vector<std::size_t> order(data.train_count);
    while (epoch < cfg.epochs) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle(mix_seed(mix_seed(cfg.seed, kShuffleStream), epoch));
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        const std::size_t e = std::min(order.size(), b + cfg.batch_size);
        step(data.train(std::span<const std::size_t>(order).subspan(b, e - b)));
      }
      ++epoch;
      if (emit(false)) {
        summary.stopped_early = true;
        break;
      }
    }
  }
  summary.iterations = iteration;
  summary.epochs = epoch;
  return summary;
}

MetricsRow evaluate_checkpoint(const ExperimentConfig& cfg,
                               const std::filesystem::path& checkpoint) {
  validate(cfg);
  const TaskData data = make_task_data(cfg);
  const Checkpoint ck = read_checkpoint(checkpoint);
  ExperimentConfig shaped = cfg;
  shaped.model = ck.model == "lstm" ? ModelKind::Lstm : ModelKind::Scornn;
  if (shaped.model == ModelKind::Scornn && ck.skew) {
    shaped.hidden = ck.skew->first.dim();
    shaped.rho = ck.skew->second.rho();
  } else if (shaped.model == ModelKind::Lstm) {
    shaped.hidden = ck.tensor("recurrent_weights").cols;
  }
  std::unique_ptr<Model> model = make_model(shaped, data);
  model->restore(ck, false);
  const EvalResult e = evaluate(*model, data);
  MetricsRow r;
  r.iteration = ck.iteration;
  r.epoch = ck.epoch;
  r.eval_loss = e.loss;
  r.eval_accuracy = e.accuracy;
  r.orthogonality = model->orthogonality();
  return r;
}

}  // namespace scornn
