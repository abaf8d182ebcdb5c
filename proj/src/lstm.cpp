#include "scornn/lstm.hpp"

#include <cmath>

namespace scornn {

namespace {

Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Real& x : m.entries()) x = static_cast<Real>(rng.uniform(-limit, limit));
  return m;
}

}  // namespace

LstmCell LstmCell::initialize(std::size_t input_size, std::size_t hidden_size,
                              std::size_t output_size, Real forget_bias,
                              Rng& rng) {
  LstmCell cell;
  cell.forget_bias = forget_bias;
  cell.input_weights = glorot_uniform(4 * hidden_size, input_size, rng);
  cell.recurrent_weights = glorot_uniform(4 * hidden_size, hidden_size, rng);
  cell.bias.assign(4 * hidden_size, Real(0));
  for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j)
    cell.bias[j] = forget_bias;
  cell.output_weights = glorot_uniform(output_size, hidden_size, rng);
  cell.output_bias.assign(output_size, Real(0));
  return cell;
}

std::size_t LstmCell::parameter_count() const noexcept {
  return input_weights.size() + recurrent_weights.size() + bias.size() +
         output_weights.size() + output_bias.size();
}

LstmForwardResult lstm_forward(const LstmCell& cell, std::span<const Matrix> inputs,
                               OutputMode mode) {
  if (inputs.empty()) throw ShapeError("lstm_forward: empty input sequence");
  const std::size_t batch = inputs.front().rows();
  const std::size_t n = cell.hidden_size();
  const std::size_t p = cell.output_size();
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].rows() != batch || inputs[t].cols() != cell.input_size()) {
      throw ShapeError("lstm_forward: input step " + std::to_string(t) + " is " +
                       shape_string(inputs[t].rows(), inputs[t].cols()));
    }
  }
  const Matrix wxt = transpose(cell.input_weights);
  const Matrix wht = transpose(cell.recurrent_weights);
  const Matrix vt = transpose(cell.output_weights);

  LstmForwardResult result;
  LstmTape& tape = result.tape;
  tape.mode = mode;
  tape.inputs.assign(inputs.begin(), inputs.end());
  tape.cells.emplace_back(batch, n);
  tape.hidden.emplace_back(batch, n);

  auto emit = [&](const Matrix& h) {
    Matrix y(batch, p);
    matmul_into(h, vt, y);
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t j = 0; j < p; ++j) y(r, j) += cell.output_bias[j];
    result.outputs.push_back(std::move(y));
  };

  for (const Matrix& x : inputs) {
    Matrix act(batch, 4 * n);
    matmul_into(x, wxt, act);
    matmul_accumulate(tape.hidden.back(), wht, act);
    Matrix c(batch, n);
    Matrix h(batch, n);
    const Matrix& c_prev = tape.cells.back();
    for (std::size_t r = 0; r < batch; ++r) {
      auto a = act.row(r);
      for (std::size_t j = 0; j < 4 * n; ++j) {
        a[j] += cell.bias[j];
        a[j] = (j >= 2 * n && j < 3 * n) ? std::tanh(a[j]) : sigmoid(a[j]);
      }
      for (std::size_t j = 0; j < n; ++j) {
        c(r, j) = a[n + j] * c_prev(r, j) + a[j] * a[2 * n + j];
        h(r, j) = a[3 * n + j] * std::tanh(c(r, j));
      }
    }
    tape.gates.push_back(std::move(act));
    tape.cells.push_back(std::move(c));
    tape.hidden.push_back(std::move(h));
    if (mode == OutputMode::PerStep) emit(tape.hidden.back());
  }
  if (mode == OutputMode::LastStep) emit(tape.hidden.back());
  return result;
}

LstmGrads lstm_backward(const LstmCell& cell, const LstmTape& tape,
                        std::span<const Matrix> output_grads,
                        bool capture_hidden_norms) {
  const std::size_t steps = tape.length();
  if (steps == 0 || tape.gates.size() != steps || tape.cells.size() != steps + 1 ||
      tape.hidden.size() != steps + 1) {
    throw ShapeError("lstm_backward: inconsistent tape");
  }
  const std::size_t expected = tape.mode == OutputMode::PerStep ? steps : 1;
  if (output_grads.size() != expected) {
    throw ShapeError("lstm_backward: " + std::to_string(output_grads.size()) +
                     " output gradients for " + std::to_string(expected) +
                     " outputs");
  }
  const std::size_t batch = tape.hidden.front().rows();
  const std::size_t n = cell.hidden_size();
  const std::size_t p = cell.output_size();
  for (const Matrix& g : output_grads) {
    if (g.rows() != batch || g.cols() != p) {
      throw ShapeError("lstm_backward: output gradient is " +
                       shape_string(g.rows(), g.cols()));
    }
  }

  LstmGrads grads;
  grads.input_weights = Matrix(4 * n, cell.input_size());
  grads.recurrent_weights = Matrix(4 * n, n);
  grads.bias.assign(4 * n, Real(0));
  grads.output_weights = Matrix(p, n);
  grads.output_bias.assign(p, Real(0));
  if (capture_hidden_norms) grads.hidden_norms.assign(steps, Real(0));

  Matrix carry_h(batch, n);
  Matrix carry_c(batch, n);
  Matrix dh(batch, n);
  Matrix dact(batch, 4 * n);
  Matrix dactt(4 * n, batch);
  Matrix dyt(p, batch);

  for (std::size_t t = steps; t-- > 0;) {
    dh = carry_h;
    const bool has_output = tape.mode == OutputMode::PerStep || t + 1 == steps;
    if (has_output) {
      const Matrix& dy = output_grads[tape.mode == OutputMode::PerStep ? t : 0];
      matmul_accumulate(dy, cell.output_weights, dh);
      transpose_into(dy, dyt);
      matmul_accumulate(dyt, tape.hidden[t + 1], grads.output_weights);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < p; ++j) grads.output_bias[j] += dy(r, j);
    }
    if (capture_hidden_norms) grads.hidden_norms[t] = fro_norm(dh);

    const Matrix& gates = tape.gates[t];
    const Matrix& c = tape.cells[t + 1];
    const Matrix& c_prev = tape.cells[t];
    for (std::size_t r = 0; r < batch; ++r) {
      auto g = gates.row(r);
      auto da = dact.row(r);
      for (std::size_t j = 0; j < n; ++j) {
        const Real i_g = g[j], f_g = g[n + j], c_g = g[2 * n + j], o_g = g[3 * n + j];
        const Real tc = std::tanh(c(r, j));
        const Real dc = carry_c(r, j) + dh(r, j) * o_g * (1 - tc * tc);
        da[j] = dc * c_g * i_g * (1 - i_g);
        da[n + j] = dc * c_prev(r, j) * f_g * (1 - f_g);
        da[2 * n + j] = dc * i_g * (1 - c_g * c_g);
        da[3 * n + j] = dh(r, j) * tc * o_g * (1 - o_g);
        carry_c(r, j) = dc * f_g;
      }
      for (std::size_t j = 0; j < 4 * n; ++j) grads.bias[j] += da[j];
    }
    transpose_into(dact, dactt);
    matmul_accumulate(dactt, tape.inputs[t], grads.input_weights);
    matmul_accumulate(dactt, tape.hidden[t], grads.recurrent_weights);
    if (t > 0) matmul_into(dact, cell.recurrent_weights, carry_h);
  }
  return grads;
}

LstmOptimizer::LstmOptimizer(const LstmCell& cell, OptimizerSettings settings) {
  groups_.emplace_back("input_weights", cell.input_weights.size(), settings);
  groups_.emplace_back("recurrent_weights", cell.recurrent_weights.size(), settings);
  groups_.emplace_back("bias", cell.bias.size(), settings);
  groups_.emplace_back("output_weights", cell.output_weights.size(), settings);
  groups_.emplace_back("output_bias", cell.output_bias.size(), settings);
}

void LstmOptimizer::apply(LstmCell& cell, const LstmGrads& grads) {
  groups_[0].step(cell.input_weights.entries(), grads.input_weights.entries());
  groups_[1].step(cell.recurrent_weights.entries(),
                  grads.recurrent_weights.entries());
  groups_[2].step(cell.bias, grads.bias);
  groups_[3].step(cell.output_weights.entries(), grads.output_weights.entries());
  groups_[4].step(cell.output_bias, grads.output_bias);
}

}  // namespace scornn
