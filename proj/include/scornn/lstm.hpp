#pragma once

// Standard LSTM baseline with the same batched interface as the scoRNN.
// Gate blocks are ordered input, forget, candidate, output.

#include <cstddef>
#include <span>
#include <vector>

#include "scornn/linalg.hpp"
#include "scornn/network.hpp"
#include "scornn/optim.hpp"
#include "scornn/rng.hpp"

namespace scornn {

struct LstmCell {
  Matrix input_weights;      // 4n x m
  Matrix recurrent_weights;  // 4n x n
  std::vector<Real> bias;    // 4n
  Matrix output_weights;     // p x n
  std::vector<Real> output_bias;
  Real forget_bias = 1;

  static LstmCell initialize(std::size_t input_size, std::size_t hidden_size,
                             std::size_t output_size, Real forget_bias, Rng& rng);

  std::size_t input_size() const noexcept { return input_weights.cols(); }
  std::size_t hidden_size() const noexcept { return recurrent_weights.cols(); }
  std::size_t output_size() const noexcept { return output_weights.rows(); }
  std::size_t parameter_count() const noexcept;
};

struct LstmTape {
  std::vector<Matrix> inputs;  // x_1..x_T
  std::vector<Matrix> gates;   // activated [i f g o], batch x 4n
  std::vector<Matrix> cells;   // c_0..c_T
  std::vector<Matrix> hidden;  // h_0..h_T
  OutputMode mode = OutputMode::PerStep;

  std::size_t length() const noexcept { return inputs.size(); }
};

struct LstmForwardResult {
  std::vector<Matrix> outputs;
  LstmTape tape;
};

struct LstmGrads {
  Matrix input_weights;
  Matrix recurrent_weights;
  std::vector<Real> bias;
  Matrix output_weights;
  std::vector<Real> output_bias;
  std::vector<Real> hidden_norms;
};

LstmForwardResult lstm_forward(const LstmCell& cell, std::span<const Matrix> inputs,
                               OutputMode mode);

LstmGrads lstm_backward(const LstmCell& cell, const LstmTape& tape,
                        std::span<const Matrix> output_grads,
                        bool capture_hidden_norms);

class LstmOptimizer {
 public:
  LstmOptimizer(const LstmCell& cell, OptimizerSettings settings);

  void apply(LstmCell& cell, const LstmGrads& grads);

  std::span<ParamGroup> groups() noexcept { return groups_; }
  std::span<const ParamGroup> groups() const noexcept { return groups_; }

 private:
  std::vector<ParamGroup> groups_;
};

}  // namespace scornn
