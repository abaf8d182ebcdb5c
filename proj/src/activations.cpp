#include "scornn/activations.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace scornn {

namespace {

Real sign(Real z) { return z > 0 ? Real(1) : (z < 0 ? Real(-1) : Real(0)); }

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": lengths " + std::to_string(a) +
                     " and " + std::to_string(b));
  }
}

}  // namespace

Real modrelu(Real z, Real b) {
  const Real m = std::abs(z) + b;
  return m > 0 ? sign(z) * m : Real(0);
}

std::vector<Real> modrelu(std::span<const Real> z, std::span<const Real> b) {
  require_same_length(z.size(), b.size(), "modrelu");
  std::vector<Real> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = modrelu(z[i], b[i]);
  return out;
}

ModReluGrads modrelu_backward(std::span<const Real> z, std::span<const Real> b,
                              std::span<const Real> upstream) {
  require_same_length(z.size(), b.size(), "modrelu_backward");
  require_same_length(z.size(), upstream.size(), "modrelu_backward");
  ModReluGrads g{std::vector<Real>(z.size(), 0), std::vector<Real>(z.size(), 0)};
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] != 0 && std::abs(z[i]) + b[i] > 0) {
      g.dz[i] = upstream[i];
      g.db[i] = upstream[i] * sign(z[i]);
    }
  }
  return g;
}

void modrelu_rows(const Matrix& z, std::span<const Real> b, Matrix& out) {
  require_same_length(z.cols(), b.size(), "modrelu_rows");
  if (out.rows() != z.rows() || out.cols() != z.cols()) {
    throw ShapeError("modrelu_rows: output shape");
  }
  const std::size_t n = z.cols();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const Real* zr = z.data() + r * n;
    Real* o = out.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const Real m = std::abs(zr[i]) + b[i];
      o[i] = m > 0 ? sign(zr[i]) * m : Real(0);
    }
  }
}

void modrelu_rows_backward(const Matrix& z, std::span<const Real> b,
                           const Matrix& upstream, Matrix& dz,
                           std::span<Real> db) {
  require_same_length(z.cols(), b.size(), "modrelu_rows_backward");
  require_same_length(z.cols(), db.size(), "modrelu_rows_backward");
  if (upstream.rows() != z.rows() || upstream.cols() != z.cols() ||
      dz.rows() != z.rows() || dz.cols() != z.cols()) {
    throw ShapeError("modrelu_rows_backward: shape mismatch");
  }
  const std::size_t n = z.cols();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const Real* zr = z.data() + r * n;
    const Real* up = upstream.data() + r * n;
    Real* d = dz.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (zr[i] != 0 && std::abs(zr[i]) + b[i] > 0) {
        d[i] = up[i];
        db[i] += up[i] * sign(zr[i]);
      } else {
        d[i] = 0;
      }
    }
  }
}

LossResult softmax_xent(const Matrix& logits, std::span<const int> targets) {
  require_same_length(logits.rows(), targets.size(), "softmax_xent");
  const std::size_t rows = logits.rows();
  const std::size_t k = logits.cols();
  LossResult out{0, Matrix(rows, k)};
  if (rows == 0) return out;
  const Real inv_rows = Real(1) / static_cast<Real>(rows);
  Real total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw TargetRangeError("softmax_xent: target " + std::to_string(t) +
                             " outside [0, " + std::to_string(k) + ")");
    }
    auto z = logits.row(r);
    const Real top = *std::max_element(z.begin(), z.end());
    Real sum = 0;
    for (Real v : z) sum += std::exp(v - top);
    const Real log_norm = top + std::log(sum);
    total += log_norm - z[static_cast<std::size_t>(t)];
    auto g = out.grad.row(r);
    for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(z[j] - log_norm) * inv_rows;
    g[static_cast<std::size_t>(t)] -= inv_rows;
  }
  out.loss = total * inv_rows;
  return out;
}

LossResult mse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("mse: prediction " + shape_string(pred.rows(), pred.cols()) +
                     " vs target " + shape_string(target.rows(), target.cols()));
  }
  LossResult out{0, Matrix(pred.rows(), pred.cols())};
  const std::size_t count = pred.size();
  if (count == 0) return out;
  const Real inv = Real(1) / static_cast<Real>(count);
  auto p = pred.entries();
  auto t = target.entries();
  auto g = out.grad.entries();
  Real total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Real diff = p[i] - t[i];
    total += diff * diff;
    g[i] = Real(2) * diff * inv;
  }
  out.loss = total * inv;
  return out;
}

}  // namespace scornn
