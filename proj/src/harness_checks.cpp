#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "scornn/cayley.hpp"
#include "scornn/harness.hpp"
#include "scornn/lstm.hpp"
#include "scornn/network.hpp"
#include "scornn/stiefel.hpp"

namespace scornn {

namespace {

constexpr std::size_t kCheckInputs = 3;
constexpr std::size_t kCheckClasses = 4;
constexpr std::size_t kCheckBatch = 2;
// Central differences at h = 1e-6 carry ~eps·|L|/h ≈ 2e-10 of rounding noise, so
// entries smaller than this are compared absolutely at floor · tolerance.
constexpr double kRelErrorFloor = 1e-4;

TaskBatch random_check_batch(std::size_t length, Rng& rng) {
  TaskBatch b;
  b.loss = LossKind::PerStepCrossEntropy;
  b.num_classes = kCheckClasses;
  for (std::size_t t = 0; t < length; ++t) {
    Matrix x(kCheckBatch, kCheckInputs);
    for (Real& v : x.entries()) v = static_cast<Real>(rng.uniform(-1, 1));
    b.inputs.push_back(std::move(x));
    for (std::size_t r = 0; r < kCheckBatch; ++r)
      b.class_targets.push_back(static_cast<int>(rng.uniform_index(kCheckClasses)));
  }
  return b;
}

void randomize(std::span<Real> values, double limit, Rng& rng) {
  for (Real& v : values) v = static_cast<Real>(rng.uniform(-limit, limit));
}

/// Perturbs each entry of `params` by +-h, evaluates `loss`, and compares the
/// central difference with `analytic`.
template <class LossFn>
GradcheckGroup compare(std::string name, std::span<Real> params,
                       std::span<const Real> analytic, double h, LossFn&& loss) {
  GradcheckGroup g{std::move(name), params.size(), 0};
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Real orig = params[i];
    params[i] = orig + static_cast<Real>(h);
    const double up = loss();
    params[i] = orig - static_cast<Real>(h);
    const double down = loss();
    params[i] = orig;
    const double numeric = (up - down) / (2 * h);
    const double a = static_cast<double>(analytic[i]);
    const double denom = std::max({std::abs(a), std::abs(numeric), kRelErrorFloor});
    g.max_rel_error = std::max(g.max_rel_error, std::abs(a - numeric) / denom);
  }
  return g;
}

std::vector<GradcheckGroup> gradcheck_sco(const GradcheckOptions& o, Rng& rng) {
  ScoCell cell = ScoCell::initialize(kCheckInputs, o.hidden, kCheckClasses, o.hidden / 2, rng);
  // Move away from the structured initialization so every entry matters.
  randomize(cell.skew.values(), 1.0, rng);
  cell.refresh_recurrent();
  randomize(cell.modrelu_bias, 0.5, rng);
  randomize(cell.output_bias, 0.5, rng);
  const TaskBatch batch = random_check_batch(o.length, rng);
  const OutputMode mode = output_mode(batch.loss);

  ForwardResult fr = sco_forward(cell, batch.inputs, mode);
  const BatchScore score = score_outputs(batch, fr.outputs);
  ScoGrads grads = sco_backward(cell, fr.tape, score.output_grads, false);
  if (o.corrupt_skew_sign)
    for (Real& v : grads.skew.values()) v = -v;

  auto loss = [&] {
    cell.refresh_recurrent();
    return score_outputs(batch, sco_forward(cell, batch.inputs, mode).outputs).loss;
  };
  std::vector<GradcheckGroup> out;
  out.push_back(compare("input_weights", cell.input_weights.entries(),
                        grads.input_weights.entries(), o.step, loss));
  out.push_back(compare("skew", cell.skew.values(), grads.skew.values(), o.step, loss));
  out.push_back(compare("modrelu_bias", cell.modrelu_bias, grads.modrelu_bias, o.step, loss));
  out.push_back(compare("output_weights", cell.output_weights.entries(),
                        grads.output_weights.entries(), o.step, loss));
  out.push_back(compare("output_bias", cell.output_bias, grads.output_bias, o.step, loss));
  return out;
}

std::vector<GradcheckGroup> gradcheck_lstm(const GradcheckOptions& o, Rng& rng) {
  LstmCell cell = LstmCell::initialize(kCheckInputs, o.hidden, kCheckClasses, 1, rng);
  randomize(cell.bias, 0.5, rng);
  randomize(cell.output_bias, 0.5, rng);
  const TaskBatch batch = random_check_batch(o.length, rng);
  const OutputMode mode = output_mode(batch.loss);

  LstmForwardResult fr = lstm_forward(cell, batch.inputs, mode);
  const BatchScore score = score_outputs(batch, fr.outputs);
  const LstmGrads grads = lstm_backward(cell, fr.tape, score.output_grads, false);

  auto loss = [&] {
    return score_outputs(batch, lstm_forward(cell, batch.inputs, mode).outputs).loss;
  };
  std::vector<GradcheckGroup> out;
  out.push_back(compare("input_weights", cell.input_weights.entries(),
                        grads.input_weights.entries(), o.step, loss));
  out.push_back(compare("recurrent_weights", cell.recurrent_weights.entries(),
                        grads.recurrent_weights.entries(), o.step, loss));
  out.push_back(compare("bias", cell.bias, grads.bias, o.step, loss));
  out.push_back(compare("output_weights", cell.output_weights.entries(),
                        grads.output_weights.entries(), o.step, loss));
  out.push_back(compare("output_bias", cell.output_bias, grads.output_bias, o.step, loss));
  return out;
}

template <std::floating_point T>
std::vector<DriftPoint> drift(const OrthodriftOptions& o, std::ostream* csv) {
  Rng init(mix_seed(o.seed, 0));
  auto [a, d] = init_block_diag<T>(o.n, o.n / 2, init);
  BasicMatrix<T> w = scaled_cayley(a, d);
  StiefelState<T> mult{w, 0};
  BasicParamGroup<T> group("skew", a.size(),
                           OptimizerSettings{OptimizerKind::Rmsprop, o.learning_rate});
  const T lr = static_cast<T>(o.learning_rate);
  const std::string tag(to_string(o.precision));

  std::vector<DriftPoint> points;
  points.reserve(o.steps);
  if (csv) *csv << kDriftHeader << '\n';
  BasicMatrix<T> g(o.n, o.n);
  for (std::size_t k = 1; k <= o.steps; ++k) {
    // The same dL/dW drives both schemes.
    Rng rng(mix_seed(o.seed, k));
    for (T& x : g.entries()) x = static_cast<T>(rng.uniform(-1, 1));

    w = step_skew(group, a, d, grad_skew(g, a, w, d));
    mult = multiplicative_update(mult, descent_direction(g, mult.w), lr);

    DriftPoint p{k, static_cast<double>(orthogonality_score(w)),
                 static_cast<double>(orthogonality_score(mult.w))};
    if (csv) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%zu,%.9e,%.9e,", p.step, p.score_cayley,
                    p.score_multiplicative);
      *csv << buf << tag << '\n';
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace

std::vector<GradcheckGroup> gradcheck(const GradcheckOptions& opts) {
  if (opts.hidden < 2 || opts.length < 1 || !(opts.step > 0)) {
    throw ConfigError("gradcheck needs hidden >= 2, length >= 1 and a positive step");
  }
  Rng rng(opts.seed);
  return opts.model == ModelKind::Scornn ? gradcheck_sco(opts, rng)
                                         : gradcheck_lstm(opts, rng);
}

Precision parse_precision(std::string_view name) {
  if (name == "single" || name == "float") return Precision::Single;
  if (name == "double") return Precision::Double;
  if (name == "extended" || name == "long-double") return Precision::Extended;
  throw ConfigError("unknown precision '" + std::string(name) + "'");
}

std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::Single: return "single";
    case Precision::Double: return "double";
    case Precision::Extended: return "extended";
  }
  return "unknown";
}

std::vector<DriftPoint> orthodrift(const OrthodriftOptions& opts, std::ostream* csv) {
  if (opts.n < 2) throw ConfigError("orthodrift needs n >= 2");
  if (!(opts.learning_rate > 0)) throw ConfigError("orthodrift needs a positive learning rate");
  switch (opts.precision) {
    case Precision::Single: return drift<float>(opts, csv);
    case Precision::Double: return drift<double>(opts, csv);
    case Precision::Extended: return drift<long double>(opts, csv);
  }
  return {};
}

}  // namespace scornn
