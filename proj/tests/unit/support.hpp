#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "scornn/cayley.hpp"
#include "scornn/linalg.hpp"
#include "scornn/rng.hpp"

namespace scornn::test {

template <std::floating_point T = Real>
BasicMatrix<T> random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                             double limit = 1.0) {
  BasicMatrix<T> m(rows, cols);
  for (T& x : m.entries()) x = static_cast<T>(rng.uniform(-limit, limit));
  return m;
}

template <std::floating_point T = Real>
BasicSkewParams<T> random_skew(std::size_t n, Rng& rng, double limit = 1.0) {
  BasicSkewParams<T> p(n);
  for (T& x : p.values()) x = static_cast<T>(rng.uniform(-limit, limit));
  return p;
}

inline std::vector<Real> random_vector(std::size_t n, Rng& rng, double limit = 1.0) {
  std::vector<Real> v(n);
  for (Real& x : v) x = static_cast<Real>(rng.uniform(-limit, limit));
  return v;
}

inline ScalingMatrix random_scaling(std::size_t n, Rng& rng) {
  std::vector<int> signs(n);
  for (int& s : signs) s = rng.uniform_index(2) == 0 ? 1 : -1;
  return ScalingMatrix(std::move(signs));
}

/// Textbook triple loop, summing over k innermost; the reference every
/// product kernel is compared against.
template <std::floating_point T>
BasicMatrix<T> naive_matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  BasicMatrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      T s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

template <std::floating_point T>
T naive_ortho_score(const BasicMatrix<T>& w) {
  const std::size_t n = w.rows();
  long double s = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double g = 0;
      for (std::size_t k = 0; k < n; ++k) g += static_cast<long double>(w(k, i)) * w(k, j);
      if (i == j) g -= 1;
      s += g * g;
    }
  return static_cast<T>(std::sqrt(s));
}

inline double rel_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace scornn::test
