#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "scornn/harness.hpp"

namespace scornn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) +
                    "' is not " + std::string(expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    bad_value(key, value, std::is_integral_v<T> ? "a non-negative integer" : "a number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

TaskKind parse_task(std::string_view key, std::string_view value) {
  if (value == "copying") return TaskKind::Copying;
  if (value == "adding") return TaskKind::Adding;
  if (value == "mnist") return TaskKind::Mnist;
  if (value == "mnist-permuted") return TaskKind::MnistPermuted;
  bad_value(key, value, "one of copying|adding|mnist|mnist-permuted");
}

ModelKind parse_model(std::string_view key, std::string_view value) {
  if (value == "scornn") return ModelKind::Scornn;
  if (value == "lstm") return ModelKind::Lstm;
  bad_value(key, value, "one of scornn|lstm");
}

OptimizerKind parse_optimizer(std::string_view key, std::string_view value) {
  try {
    return parse_optimizer_kind(value);
  } catch (const std::invalid_argument&) {
    bad_value(key, value, "one of sgd|rmsprop|adam");
  }
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const char* build_precision() {
#ifdef SCORNN_SINGLE_PRECISION
  return "single";
#else
  return "double";
#endif
}

}  // namespace

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Copying: return "copying";
    case TaskKind::Adding: return "adding";
    case TaskKind::Mnist: return "mnist";
    case TaskKind::MnistPermuted: return "mnist-permuted";
  }
  return "unknown";
}

std::string_view to_string(ModelKind model) {
  return model == ModelKind::Scornn ? "scornn" : "lstm";
}

std::size_t ExperimentConfig::effective_rho() const {
  if (rho) return *rho;
  switch (task) {
    case TaskKind::Copying: return hidden / 2;
    case TaskKind::Adding: return length <= 200 ? hidden / 2 : 7 * hidden / 10;
    case TaskKind::Mnist: return hidden / 10;
    case TaskKind::MnistPermuted: return hidden / 2;
  }
  return 0;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };

  if (key == "task") cfg.task = parse_task(key, value);
  else if (key == "model") cfg.model = parse_model(key, value);
  else if (key == "hidden") cfg.hidden = size();
  else if (key == "rho") {
    if (value == "auto") cfg.rho.reset();
    else cfg.rho = size();
  }
  else if (key == "length") cfg.length = size();
  else if (key == "batch_size") cfg.batch_size = size();
  else if (key == "iterations") cfg.iterations = size();
  else if (key == "epochs") cfg.epochs = size();
  else if (key == "train_size") cfg.train_size = size();
  else if (key == "test_size") cfg.test_size = size();
  else if (key == "optimizer_in_out") cfg.in_out.kind = parse_optimizer(key, value);
  else if (key == "lr_in_out") cfg.in_out.learning_rate = real();
  else if (key == "optimizer_recurrent") cfg.recurrent.kind = parse_optimizer(key, value);
  else if (key == "lr_recurrent") cfg.recurrent.learning_rate = real();
  else if (key == "rmsprop_decay") cfg.in_out.decay = cfg.recurrent.decay = real();
  else if (key == "adam_beta1") cfg.in_out.beta1 = cfg.recurrent.beta1 = real();
  else if (key == "adam_beta2") cfg.in_out.beta2 = cfg.recurrent.beta2 = real();
  else if (key == "epsilon") cfg.in_out.epsilon = cfg.recurrent.epsilon = real();
  else if (key == "lstm_forget_bias") cfg.lstm_forget_bias = real();
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "precision") {
    if (value != "single" && value != "double") bad_value(key, value, "single|double");
    cfg.precision = std::string(value);
  }
  else if (key == "output_dir") cfg.output_dir = std::string(value);
  else if (key == "mnist_dir") cfg.mnist_dir = std::string(value);
  else if (key == "permutation_seed") cfg.permutation_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "eval_every") cfg.eval_every = size();
  else if (key == "hidden_norm_every") cfg.hidden_norm_every = size();
  else if (key == "early_stop_below") cfg.early_stop_below = real();
  else if (key == "resume") cfg.resume = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    apply_setting(base, trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  return base;
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "task = " << to_string(cfg.task) << '\n'
     << "model = " << to_string(cfg.model) << '\n'
     << "hidden = " << cfg.hidden << '\n'
     << "rho = " << (cfg.rho ? std::to_string(*cfg.rho) : std::string("auto")) << '\n'
     << "length = " << cfg.length << '\n'
     << "batch_size = " << cfg.batch_size << '\n'
     << "iterations = " << cfg.iterations << '\n'
     << "epochs = " << cfg.epochs << '\n'
     << "train_size = " << cfg.train_size << '\n'
     << "test_size = " << cfg.test_size << '\n'
     << "optimizer_in_out = " << to_string(cfg.in_out.kind) << '\n'
     << "lr_in_out = " << fmt_double(cfg.in_out.learning_rate) << '\n'
     << "optimizer_recurrent = " << to_string(cfg.recurrent.kind) << '\n'
     << "lr_recurrent = " << fmt_double(cfg.recurrent.learning_rate) << '\n'
     << "rmsprop_decay = " << fmt_double(cfg.in_out.decay) << '\n'
     << "adam_beta1 = " << fmt_double(cfg.in_out.beta1) << '\n'
     << "adam_beta2 = " << fmt_double(cfg.in_out.beta2) << '\n'
     << "epsilon = " << fmt_double(cfg.in_out.epsilon) << '\n'
     << "lstm_forget_bias = " << fmt_double(cfg.lstm_forget_bias) << '\n'
     << "seed = " << cfg.seed << '\n'
     << "precision = " << cfg.precision << '\n'
     << "output_dir = " << cfg.output_dir.string() << '\n'
     << "mnist_dir = " << cfg.mnist_dir.string() << '\n'
     << "permutation_seed = " << cfg.permutation_seed << '\n'
     << "eval_every = " << cfg.eval_every << '\n'
     << "hidden_norm_every = " << cfg.hidden_norm_every << '\n'
     << "early_stop_below = " << fmt_double(cfg.early_stop_below) << '\n'
     << "resume = " << (cfg.resume ? "true" : "false") << '\n';
  return os.str();
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig cfg;
  cfg.output_dir = std::filesystem::path("runs") / std::string(name);
  if (name == "copying" || name == "copying-lstm") {
    cfg.task = TaskKind::Copying;
    cfg.length = 200;
    cfg.batch_size = 128;
    cfg.iterations = 2000;
    cfg.test_size = 1000;
    cfg.eval_every = 100;
    if (name == "copying") {
      cfg.hidden = 64;
    } else {
      cfg.model = ModelKind::Lstm;
      cfg.hidden = 40;
    }
  } else if (name == "adding" || name == "adding-lstm") {
    cfg.task = TaskKind::Adding;
    cfg.length = 200;
    cfg.batch_size = 50;
    cfg.epochs = 10;
    cfg.train_size = 100000;
    cfg.test_size = 10000;
    if (name == "adding") {
      cfg.hidden = 64;
    } else {
      cfg.model = ModelKind::Lstm;
      cfg.hidden = 40;
      cfg.lstm_forget_bias = 2.0;
    }
  } else if (name == "mnist") {
    cfg.task = TaskKind::Mnist;
    cfg.hidden = 128;
    cfg.batch_size = 50;
    cfg.epochs = 5;
    cfg.train_size = 55000;
    cfg.test_size = 10000;
  } else if (name == "mnist-long") {
    cfg.task = TaskKind::Mnist;
    cfg.hidden = 170;
    cfg.batch_size = 50;
    cfg.epochs = 70;
    cfg.train_size = 55000;
    cfg.test_size = 10000;
  } else if (name == "mnist-permuted") {
    cfg.task = TaskKind::MnistPermuted;
    cfg.hidden = 170;
    cfg.batch_size = 50;
    cfg.epochs = 70;
    cfg.train_size = 55000;
    cfg.test_size = 10000;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return cfg;
}

std::vector<std::string> preset_names() {
  return {"copying", "copying-lstm", "adding", "adding-lstm",
          "mnist", "mnist-long", "mnist-permuted"};
}

std::filesystem::path resolve_mnist_dir(const ExperimentConfig& cfg) {
  if (!cfg.mnist_dir.empty()) return cfg.mnist_dir;
  if (const char* root = std::getenv(kDataRootEnv); root && *root) {
    const std::filesystem::path base(root);
    if (std::filesystem::exists(base / "mnist")) return base / "mnist";
    return base;
  }
  return {};
}

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  const std::size_t min_hidden = cfg.model == ModelKind::Scornn ? 2 : 1;
  if (cfg.hidden < min_hidden) fail("hidden must be at least " + std::to_string(min_hidden));
  if (cfg.rho && *cfg.rho > cfg.hidden) {
    fail("rho = " + std::to_string(*cfg.rho) + " exceeds hidden = " +
         std::to_string(cfg.hidden));
  }
  if (cfg.batch_size == 0) fail("batch_size must be positive");
  if (cfg.test_size == 0) fail("test_size must be positive");
  if (cfg.task == TaskKind::Copying) {
    if (cfg.length < 1) fail("copying needs length >= 1");
    if (cfg.eval_every == 0) fail("eval_every must be positive");
  }
  if (cfg.task == TaskKind::Adding && cfg.length < 4) fail("adding needs length >= 4");
  if (cfg.epoch_based() && cfg.train_size == 0) fail("train_size must be positive");
  if (!(cfg.in_out.learning_rate > 0) || !(cfg.recurrent.learning_rate > 0)) {
    fail("learning rates must be positive");
  }
  if (cfg.precision != build_precision()) {
    fail("precision = " + cfg.precision + " but this build computes in " +
         build_precision() + " (toggle SCORNN_SINGLE_PRECISION at configure time)");
  }
  if (cfg.task == TaskKind::Mnist || cfg.task == TaskKind::MnistPermuted) {
    const std::filesystem::path dir = resolve_mnist_dir(cfg);
    if (dir.empty()) fail("MNIST task needs mnist_dir or $" + std::string(kDataRootEnv));
    for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                          "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}) {
      if (!std::filesystem::exists(dir / f)) fail("missing MNIST file " + (dir / f).string());
    }
  }
}

}  // namespace scornn
