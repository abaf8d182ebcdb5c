#pragma once

// Single-layer scoRNN:
//
//     z_t = U x_t + W h_{t-1},   h_t = modReLU(z_t; bias),   y_t = V h_t + c,
//
// with h_0 = 0 and W = scaled_cayley(A, D). Sequences are processed a batch
// at a time: every per-step quantity is a (batch x features) matrix.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "scornn/cayley.hpp"
#include "scornn/linalg.hpp"
#include "scornn/optim.hpp"
#include "scornn/rng.hpp"

namespace scornn {

enum class OutputMode { PerStep, LastStep };

/// Parameters of one scoRNN. `recurrent` caches scaled_cayley(skew, scaling)
/// and must be refreshed after any change to `skew`.
struct ScoCell {
  Matrix input_weights;            // U, n x m
  SkewParams skew;                 // A, packed
  ScalingMatrix scaling;           // D, fixed for the run
  Matrix recurrent;                // W
  std::vector<Real> modrelu_bias;  // n
  Matrix output_weights;           // V, p x n
  std::vector<Real> output_bias;   // c, p

  /// Glorot-uniform U and V, block-diagonal A with `rho` reflections, zero
  /// biases.
  static ScoCell initialize(std::size_t input_size, std::size_t hidden_size,
                            std::size_t output_size, std::size_t rho, Rng& rng);

  std::size_t input_size() const noexcept { return input_weights.cols(); }
  std::size_t hidden_size() const noexcept { return recurrent.rows(); }
  std::size_t output_size() const noexcept { return output_weights.rows(); }
  std::size_t parameter_count() const noexcept;

  void refresh_recurrent() { recurrent = scaled_cayley(skew, scaling); }
};

struct ForwardTape {
  std::vector<Matrix> inputs;           // x_1..x_T
  std::vector<Matrix> pre_activations;  // z_1..z_T
  std::vector<Matrix> hidden;           // h_0..h_T
  OutputMode mode = OutputMode::PerStep;

  std::size_t length() const noexcept { return inputs.size(); }
};

struct ForwardResult {
  std::vector<Matrix> outputs;  // T entries for PerStep, one for LastStep
  ForwardTape tape;
};

struct ScoGrads {
  Matrix input_weights;
  Matrix recurrent;  // dL/dW, before the Cayley chain rule
  SkewParams skew;
  std::vector<Real> modrelu_bias;
  Matrix output_weights;
  std::vector<Real> output_bias;
  /// ‖dL/dh_t‖_F over the batch for t = 1..T, when requested.
  std::vector<Real> hidden_norms;
};

ForwardResult sco_forward(const ScoCell& cell, std::span<const Matrix> inputs,
                          OutputMode mode);

/// BPTT through the tape. `output_grads` holds dL/dy for each produced output
/// (T of them, or one in LastStep mode). The accumulated dL/dW is mapped to
/// the skew parameters with grad_skew.
ScoGrads sco_backward(const ScoCell& cell, const ForwardTape& tape,
                      std::span<const Matrix> output_grads,
                      bool capture_hidden_norms);

/// W h computed as D, then (I - A), then (I + A)^{-1}, applied to the rows of
/// `h` (each row one state). Equal to h Wᵀ up to rounding.
Matrix three_layer_apply(const SkewParams& skew, const ScalingMatrix& scaling,
                         const Matrix& h);

/// Optimizer groups for a scoRNN: the skew entries use `recurrent`, every
/// other tensor uses `in_out`.
class ScoOptimizer {
 public:
  ScoOptimizer(const ScoCell& cell, OptimizerSettings in_out,
               OptimizerSettings recurrent);

  /// Steps every group and refreshes the cached W.
  void apply(ScoCell& cell, const ScoGrads& grads);

  std::span<ParamGroup> groups() noexcept { return groups_; }
  std::span<const ParamGroup> groups() const noexcept { return groups_; }

 private:
  // input, skew, modrelu_bias, output, output_bias
  std::vector<ParamGroup> groups_;
};

}  // namespace scornn
