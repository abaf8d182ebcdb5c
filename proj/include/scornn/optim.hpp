#pragma once

// First-order optimizers over named parameter groups. Each group has its own
// learning rate and state, which is how the recurrent (skew) parameters get a
// smaller step than the input/output weights.

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scornn/cayley.hpp"
#include "scornn/linalg.hpp"

namespace scornn {

enum class OptimizerKind { Sgd, Rmsprop, Adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

/// Hyperparameters are kept in double and rounded to the group's scalar type
/// when a step is taken.
struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Rmsprop;
  double learning_rate = 1e-3;
  double decay = 0.9;  // RMSprop
  double beta1 = 0.9;  // Adam
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <std::floating_point T>
class BasicParamGroup {
 public:
  BasicParamGroup(std::string name, std::size_t size, OptimizerSettings settings);

  /// One update of `params` in place.
  ///   SGD:     p -= lr g
  ///   RMSprop: s = decay s + (1 - decay) g^2;  p -= lr g / (sqrt(s) + eps)
  ///   Adam:    bias-corrected moments;          p -= lr m^ / (sqrt(v^) + eps)
  /// A non-finite gradient entry aborts before anything is modified.
  void step(std::span<T> params, std::span<const T> grads);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return size_; }
  const OptimizerSettings& settings() const noexcept { return settings_; }
  std::uint64_t steps_taken() const noexcept { return steps_; }

  // Accumulators, exposed for checkpointing. RMSprop keeps its running mean
  // square in the second-moment slot.
  std::span<const T> first_moment() const noexcept { return m_; }
  std::span<const T> second_moment() const noexcept { return v_; }
  void restore_state(std::vector<T> first, std::vector<T> second,
                     std::uint64_t steps);

 private:
  std::string name_;
  std::size_t size_;
  OptimizerSettings settings_;
  std::vector<T> m_;
  std::vector<T> v_;
  std::uint64_t steps_ = 0;
};

using ParamGroup = BasicParamGroup<Real>;

/// Updates the packed skew entries with the group's rule and returns the
/// freshly reconstructed W = scaled_cayley(a, d).
template <std::floating_point T>
BasicMatrix<T> step_skew(BasicParamGroup<T>& group, BasicSkewParams<T>& a,
                         const ScalingMatrix& d, const BasicSkewParams<T>& grads);

}  // namespace scornn
