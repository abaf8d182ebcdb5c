#include "scornn/optim.hpp"

#include <cmath>

namespace scornn {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Rmsprop: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "rmsprop") return OptimizerKind::Rmsprop;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

template <std::floating_point T>
BasicParamGroup<T>::BasicParamGroup(std::string name, std::size_t size,
                                    OptimizerSettings settings)
    : name_(std::move(name)),
      size_(size),
      settings_(settings),
      m_(settings.kind == OptimizerKind::Adam ? size : 0, T(0)),
      v_(settings.kind == OptimizerKind::Sgd ? 0 : size, T(0)) {
  if (!(settings_.learning_rate > 0)) {
    throw std::invalid_argument("parameter group '" + name_ +
                                "': learning rate must be positive");
  }
}

template <std::floating_point T>
void BasicParamGroup<T>::step(std::span<T> params, std::span<const T> grads) {
  if (params.size() != size_ || grads.size() != size_) {
    throw ShapeError("parameter group '" + name_ + "': expected " +
                     std::to_string(size_) + " entries, got params=" +
                     std::to_string(params.size()) +
                     " grads=" + std::to_string(grads.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NonFiniteGradientError("parameter group '" + name_ +
                                   "': non-finite gradient at entry " +
                                   std::to_string(i) + " on step " +
                                   std::to_string(steps_ + 1));
    }
  }
  ++steps_;
  const T lr = static_cast<T>(settings_.learning_rate);
  const T eps = static_cast<T>(settings_.epsilon);
  switch (settings_.kind) {
    case OptimizerKind::Sgd:
      for (std::size_t i = 0; i < size_; ++i) params[i] -= lr * grads[i];
      break;
    case OptimizerKind::Rmsprop: {
      const T rho = static_cast<T>(settings_.decay);
      for (std::size_t i = 0; i < size_; ++i) {
        v_[i] = rho * v_[i] + (1 - rho) * grads[i] * grads[i];
        params[i] -= lr * grads[i] / (std::sqrt(v_[i]) + eps);
      }
      break;
    }
    case OptimizerKind::Adam: {
      const T b1 = static_cast<T>(settings_.beta1);
      const T b2 = static_cast<T>(settings_.beta2);
      const T t = static_cast<T>(steps_);
      const T c1 = 1 - std::pow(b1, t);
      const T c2 = 1 - std::pow(b2, t);
      for (std::size_t i = 0; i < size_; ++i) {
        m_[i] = b1 * m_[i] + (1 - b1) * grads[i];
        v_[i] = b2 * v_[i] + (1 - b2) * grads[i] * grads[i];
        const T mhat = m_[i] / c1;
        const T vhat = v_[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      break;
    }
  }
}

template <std::floating_point T>
void BasicParamGroup<T>::restore_state(std::vector<T> first, std::vector<T> second,
                                       std::uint64_t steps) {
  if (first.size() != m_.size() || second.size() != v_.size()) {
    throw ShapeError("parameter group '" + name_ + "': optimizer state shape");
  }
  m_ = std::move(first);
  v_ = std::move(second);
  steps_ = steps;
}

template <std::floating_point T>
BasicMatrix<T> step_skew(BasicParamGroup<T>& group, BasicSkewParams<T>& a,
                         const ScalingMatrix& d, const BasicSkewParams<T>& grads) {
  if (grads.dim() != a.dim()) {
    throw ShapeError("step_skew: gradient for n=" + std::to_string(grads.dim()) +
                     ", parameters for n=" + std::to_string(a.dim()));
  }
  group.step(a.values(), grads.values());
  return scaled_cayley(a, d);
}

#define SCORNN_INSTANTIATE_OPTIM(T)                                            \
  template class BasicParamGroup<T>;                                           \
  template BasicMatrix<T> step_skew(BasicParamGroup<T>&, BasicSkewParams<T>&,  \
                                    const ScalingMatrix&,                      \
                                    const BasicSkewParams<T>&);

SCORNN_INSTANTIATE_OPTIM(float)
SCORNN_INSTANTIATE_OPTIM(double)
SCORNN_INSTANTIATE_OPTIM(long double)

#undef SCORNN_INSTANTIATE_OPTIM

}  // namespace scornn
