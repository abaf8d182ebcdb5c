#pragma once

// modReLU and the two task losses, each paired with its analytic gradient.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "scornn/linalg.hpp"

namespace scornn {

/// sign(z) * max(|z| + b, 0) with sign(0) = 0.
Real modrelu(Real z, Real b);

std::vector<Real> modrelu(std::span<const Real> z, std::span<const Real> b);

struct ModReluGrads {
  std::vector<Real> dz;
  std::vector<Real> db;
};

/// Active where z != 0 and |z| + b > 0: dz = upstream, db = upstream * sign(z).
/// Zero everywhere else, including the kink.
ModReluGrads modrelu_backward(std::span<const Real> z, std::span<const Real> b,
                              std::span<const Real> upstream);

/// Row-batched forms: each row of `z` is one sample, `b` has one entry per
/// column. The batched backward writes dz and adds the column sums of the
/// bias gradient into `db`.
void modrelu_rows(const Matrix& z, std::span<const Real> b, Matrix& out);
void modrelu_rows_backward(const Matrix& z, std::span<const Real> b,
                           const Matrix& upstream, Matrix& dz,
                           std::span<Real> db);

struct LossResult {
  Real loss = 0;
  Matrix grad;
};

class TargetRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Mean over rows of -log softmax(logits)[target]; grad = (softmax - onehot)/rows.
LossResult softmax_xent(const Matrix& logits, std::span<const int> targets);

/// Mean of squared differences; grad = 2 (pred - target) / count.
LossResult mse(const Matrix& pred, const Matrix& target);

}  // namespace scornn
