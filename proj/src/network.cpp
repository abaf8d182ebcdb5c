#include "scornn/network.hpp"

#include <cmath>

#include "scornn/activations.hpp"

namespace scornn {

namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Real& x : m.entries()) x = static_cast<Real>(rng.uniform(-limit, limit));
  return m;
}

void add_row_bias(Matrix& m, std::span<const Real> bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
}

void add_column_sums(const Matrix& m, std::span<Real> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
}

void check_inputs(const ScoCell& cell, std::span<const Matrix> inputs) {
  if (inputs.empty()) throw ShapeError("sco_forward: empty input sequence");
  const std::size_t batch = inputs.front().rows();
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].rows() != batch || inputs[t].cols() != cell.input_size()) {
      throw ShapeError("sco_forward: input step " + std::to_string(t) + " is " +
                       shape_string(inputs[t].rows(), inputs[t].cols()) +
                       ", expected " + shape_string(batch, cell.input_size()));
    }
  }
}

}  // namespace

ScoCell ScoCell::initialize(std::size_t input_size, std::size_t hidden_size,
                            std::size_t output_size, std::size_t rho, Rng& rng) {
  ScoCell cell;
  cell.input_weights = glorot_uniform(hidden_size, input_size, rng);
  auto [skew, scaling] = init_block_diag<Real>(hidden_size, rho, rng);
  cell.skew = std::move(skew);
  cell.scaling = std::move(scaling);
  cell.refresh_recurrent();
  cell.modrelu_bias.assign(hidden_size, Real(0));
  cell.output_weights = glorot_uniform(output_size, hidden_size, rng);
  cell.output_bias.assign(output_size, Real(0));
  return cell;
}

std::size_t ScoCell::parameter_count() const noexcept {
  return input_weights.size() + skew.size() + modrelu_bias.size() +
         output_weights.size() + output_bias.size();
}

ForwardResult sco_forward(const ScoCell& cell, std::span<const Matrix> inputs,
                          OutputMode mode) {
  check_inputs(cell, inputs);
  const std::size_t steps = inputs.size();
  const std::size_t batch = inputs.front().rows();
  const std::size_t n = cell.hidden_size();
  const std::size_t p = cell.output_size();

  const Matrix ut = transpose(cell.input_weights);
  const Matrix wt = transpose(cell.recurrent);
  const Matrix vt = transpose(cell.output_weights);

  ForwardResult result;
  ForwardTape& tape = result.tape;
  tape.mode = mode;
  tape.inputs.assign(inputs.begin(), inputs.end());
  tape.pre_activations.reserve(steps);
  tape.hidden.reserve(steps + 1);
  tape.hidden.emplace_back(batch, n);

  auto emit = [&](const Matrix& h) {
    Matrix y(batch, p);
    matmul_into(h, vt, y);
    add_row_bias(y, cell.output_bias);
    result.outputs.push_back(std::move(y));
  };

  for (std::size_t t = 0; t < steps; ++t) {
    Matrix z(batch, n);
    matmul_into(inputs[t], ut, z);
    matmul_accumulate(tape.hidden.back(), wt, z);
    Matrix h(batch, n);
    modrelu_rows(z, cell.modrelu_bias, h);
    tape.pre_activations.push_back(std::move(z));
    tape.hidden.push_back(std::move(h));
    if (mode == OutputMode::PerStep) emit(tape.hidden.back());
  }
  if (mode == OutputMode::LastStep) emit(tape.hidden.back());
  return result;
}

ScoGrads sco_backward(const ScoCell& cell, const ForwardTape& tape,
                      std::span<const Matrix> output_grads,
                      bool capture_hidden_norms) {
  const std::size_t steps = tape.length();
  if (steps == 0 || tape.pre_activations.size() != steps ||
      tape.hidden.size() != steps + 1) {
    throw ShapeError("sco_backward: inconsistent tape");
  }
  const std::size_t expected = tape.mode == OutputMode::PerStep ? steps : 1;
  if (output_grads.size() != expected) {
    throw ShapeError("sco_backward: " + std::to_string(output_grads.size()) +
                     " output gradients for " + std::to_string(expected) +
                     " outputs");
  }
  const std::size_t batch = tape.hidden.front().rows();
  const std::size_t n = cell.hidden_size();
  const std::size_t p = cell.output_size();
  for (const Matrix& g : output_grads) {
    if (g.rows() != batch || g.cols() != p) {
      throw ShapeError("sco_backward: output gradient is " +
                       shape_string(g.rows(), g.cols()) + ", expected " +
                       shape_string(batch, p));
    }
  }

  ScoGrads grads;
  grads.input_weights = Matrix(n, cell.input_size());
  grads.recurrent = Matrix(n, n);
  grads.modrelu_bias.assign(n, Real(0));
  grads.output_weights = Matrix(p, n);
  grads.output_bias.assign(p, Real(0));
  if (capture_hidden_norms) grads.hidden_norms.assign(steps, Real(0));

  Matrix carry(batch, n);  // dL/dh_t flowing back from step t+1
  Matrix dh(batch, n);
  Matrix dz(batch, n);
  Matrix dzt(n, batch);
  Matrix dyt(p, batch);

  for (std::size_t t = steps; t-- > 0;) {
    dh = carry;
    const bool has_output = tape.mode == OutputMode::PerStep || t + 1 == steps;
    if (has_output) {
      const Matrix& dy = output_grads[tape.mode == OutputMode::PerStep ? t : 0];
      matmul_accumulate(dy, cell.output_weights, dh);
      transpose_into(dy, dyt);
      matmul_accumulate(dyt, tape.hidden[t + 1], grads.output_weights);
      add_column_sums(dy, grads.output_bias);
    }
    if (capture_hidden_norms) grads.hidden_norms[t] = fro_norm(dh);

    modrelu_rows_backward(tape.pre_activations[t], cell.modrelu_bias, dh, dz,
                          grads.modrelu_bias);
    transpose_into(dz, dzt);
    matmul_accumulate(dzt, tape.hidden[t], grads.recurrent);
    matmul_accumulate(dzt, tape.inputs[t], grads.input_weights);
    if (t > 0) matmul_into(dz, cell.recurrent, carry);
  }

  grads.skew = grad_skew(grads.recurrent, cell.skew, cell.recurrent, cell.scaling);
  return grads;
}

Matrix three_layer_apply(const SkewParams& skew, const ScalingMatrix& scaling,
                         const Matrix& h) {
  const std::size_t n = skew.dim();
  if (h.cols() != n || scaling.dim() != n) {
    throw ShapeError("three_layer_apply: state width " + std::to_string(h.cols()) +
                     " for n=" + std::to_string(n));
  }
  // Columns of hᵀ are the states.
  Matrix layer1 = transpose(h);
  for (std::size_t i = 0; i < n; ++i)
    if (scaling[i] < 0)
      for (Real& x : layer1.row(i)) x = -x;

  Matrix a = materialize(skew);
  Matrix minus = scale(a, Real(-1));
  for (std::size_t i = 0; i < n; ++i) {
    minus(i, i) += 1;
    a(i, i) += 1;
  }
  const Matrix layer2 = matmul(minus, layer1);
  const Matrix layer3 = LuFactorization<Real>(a).solve(layer2);
  return transpose(layer3);
}

ScoOptimizer::ScoOptimizer(const ScoCell& cell, OptimizerSettings in_out,
                           OptimizerSettings recurrent) {
  groups_.emplace_back("input_weights", cell.input_weights.size(), in_out);
  groups_.emplace_back("skew", cell.skew.size(), recurrent);
  groups_.emplace_back("modrelu_bias", cell.modrelu_bias.size(), in_out);
  groups_.emplace_back("output_weights", cell.output_weights.size(), in_out);
  groups_.emplace_back("output_bias", cell.output_bias.size(), in_out);
}

void ScoOptimizer::apply(ScoCell& cell, const ScoGrads& grads) {
  groups_[0].step(cell.input_weights.entries(), grads.input_weights.entries());
  cell.recurrent = step_skew(groups_[1], cell.skew, cell.scaling, grads.skew);
  groups_[2].step(cell.modrelu_bias, grads.modrelu_bias);
  groups_[3].step(cell.output_weights.entries(), grads.output_weights.entries());
  groups_[4].step(cell.output_bias, grads.output_bias);
}

}  // namespace scornn
