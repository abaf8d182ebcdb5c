#include "scornn/cayley.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace scornn {

namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": dimension " + std::to_string(got) +
                     ", expected " + std::to_string(want));
  }
}

// Right-multiplies by D: column j picks up sign d_j.
template <std::floating_point T>
void scale_columns(BasicMatrix<T>& m, const ScalingMatrix& d) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (d[j] < 0) m(i, j) = -m(i, j);
}

}  // namespace

template <std::floating_point T>
BasicSkewParams<T>::BasicSkewParams(std::size_t n, std::vector<T> values)
    : n_(n), v_(std::move(values)) {
  if (v_.size() != packed_size(n)) {
    throw ShapeError("skew parameters for n=" + std::to_string(n) + " need " +
                     std::to_string(packed_size(n)) + " values, got " +
                     std::to_string(v_.size()));
  }
}

ScalingMatrix::ScalingMatrix(std::vector<int> signs) : signs_(std::move(signs)) {
  for (int s : signs_) {
    if (s != 1 && s != -1) {
      throw std::invalid_argument("scaling matrix entries must be +1 or -1");
    }
    if (s < 0) ++rho_;
  }
}

ScalingMatrix ScalingMatrix::with_rho(std::size_t n, std::size_t rho) {
  if (rho > n) {
    throw std::out_of_range("rho=" + std::to_string(rho) + " exceeds n=" +
                            std::to_string(n));
  }
  std::vector<int> signs(n, 1);
  for (std::size_t i = 0; i < rho; ++i) signs[i] = -1;
  return ScalingMatrix(std::move(signs));
}

template <std::floating_point T>
BasicMatrix<T> ScalingMatrix::as_matrix() const {
  BasicMatrix<T> m(dim(), dim());
  for (std::size_t i = 0; i < dim(); ++i) m(i, i) = static_cast<T>(signs_[i]);
  return m;
}

template <std::floating_point T>
BasicMatrix<T> materialize(const BasicSkewParams<T>& p) {
  const std::size_t n = p.dim();
  BasicMatrix<T> a(n, n);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const T v = p[BasicSkewParams<T>::index(i, j)];
      a(j, i) = v;
      a(i, j) = -v;
    }
  }
  return a;
}

template <std::floating_point T>
BasicSkewParams<T> pack_skew(const BasicMatrix<T>& m) {
  if (!m.is_square()) {
    throw ShapeError("pack_skew of " + shape_string(m.rows(), m.cols()));
  }
  BasicSkewParams<T> p(m.rows());
  for (std::size_t i = 1; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      p[BasicSkewParams<T>::index(i, j)] = (m(j, i) - m(i, j)) / T(2);
  return p;
}

template <std::floating_point T>
BasicMatrix<T> scaled_cayley(const BasicSkewParams<T>& a, const ScalingMatrix& d) {
  require_dim(d.dim(), a.dim(), "scaled_cayley scaling");
  const std::size_t n = a.dim();
  const BasicMatrix<T> skew = materialize(a);
  BasicMatrix<T> plus = skew;
  BasicMatrix<T> minus = scale(skew, T(-1));
  for (std::size_t i = 0; i < n; ++i) {
    plus(i, i) += T(1);
    minus(i, i) += T(1);
  }
  BasicMatrix<T> w = LuFactorization<T>(plus).solve(minus);
  scale_columns(w, d);
  return w;
}

template <std::floating_point T>
BasicSkewParams<T> inverse_scaled_cayley(const BasicMatrix<T>& w,
                                         const ScalingMatrix& d) {
  if (!w.is_square()) {
    throw ShapeError("inverse_scaled_cayley of " +
                     shape_string(w.rows(), w.cols()));
  }
  require_dim(d.dim(), w.rows(), "inverse_scaled_cayley scaling");
  const std::size_t n = w.rows();
  BasicMatrix<T> wd = w;
  scale_columns(wd, d);
  BasicMatrix<T> plus = wd;
  BasicMatrix<T> minus = scale(wd, T(-1));
  for (std::size_t i = 0; i < n; ++i) {
    plus(i, i) += T(1);
    minus(i, i) += T(1);
  }
  // (I + WD)^{-1} and (I - WD) commute, so a left solve gives the same A.
  return pack_skew(LuFactorization<T>(plus).solve(minus));
}

template <std::floating_point T>
BasicSkewParams<T> grad_skew(const BasicMatrix<T>& dl_dw,
                             const BasicSkewParams<T>& a,
                             const BasicMatrix<T>& w, const ScalingMatrix& d) {
  const std::size_t n = a.dim();
  require_dim(dl_dw.rows(), n, "grad_skew dL/dW rows");
  require_dim(dl_dw.cols(), n, "grad_skew dL/dW cols");
  require_dim(w.rows(), n, "grad_skew W rows");
  require_dim(w.cols(), n, "grad_skew W cols");
  require_dim(d.dim(), n, "grad_skew scaling");

  BasicMatrix<T> d_plus_wt = transpose(w);
  for (std::size_t i = 0; i < n; ++i) d_plus_wt(i, i) += static_cast<T>(d[i]);
  const BasicMatrix<T> rhs = matmul(dl_dw, d_plus_wt);

  BasicMatrix<T> plus = materialize(a);
  for (std::size_t i = 0; i < n; ++i) plus(i, i) += T(1);
  const BasicMatrix<T> v = LuFactorization<T>(plus).solve_transposed(rhs);

  // Packed entry k of the pair (i, j) is dL/dA(j, i) = (Vᵀ - V)(j, i).
  BasicSkewParams<T> g(n);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      g[BasicSkewParams<T>::index(i, j)] = v(i, j) - v(j, i);
  return g;
}

template <std::floating_point T>
BasicSkewParams<T> block_diag_from_angles(std::size_t n,
                                          std::span<const double> angles) {
  if (angles.size() != n / 2) {
    throw ShapeError("block_diag_from_angles: " + std::to_string(angles.size()) +
                     " angles for n=" + std::to_string(n));
  }
  BasicSkewParams<T> p(n);
  for (std::size_t b = 0; b < n / 2; ++b) {
    const double c = std::cos(angles[b]);
    const double s = std::sqrt((1.0 - c) / (1.0 + c));
    p[BasicSkewParams<T>::index(2 * b + 1, 2 * b)] = static_cast<T>(s);
  }
  return p;
}

template <std::floating_point T>
std::pair<BasicSkewParams<T>, ScalingMatrix> init_block_diag(std::size_t n,
                                                             std::size_t rho,
                                                             Rng& rng) {
  ScalingMatrix d = ScalingMatrix::with_rho(n, rho);
  std::vector<double> angles(n / 2);
  for (double& t : angles) t = rng.uniform(0.0, std::numbers::pi / 2);
  return {block_diag_from_angles<T>(n, angles), std::move(d)};
}

#define SCORNN_INSTANTIATE_CAYLEY(T)                                          \
  template class BasicSkewParams<T>;                                          \
  template BasicMatrix<T> ScalingMatrix::as_matrix<T>() const;                \
  template BasicMatrix<T> materialize(const BasicSkewParams<T>&);             \
  template BasicSkewParams<T> pack_skew(const BasicMatrix<T>&);               \
  template BasicMatrix<T> scaled_cayley(const BasicSkewParams<T>&,            \
                                        const ScalingMatrix&);                \
  template BasicSkewParams<T> inverse_scaled_cayley(const BasicMatrix<T>&,    \
                                                    const ScalingMatrix&);    \
  template BasicSkewParams<T> grad_skew(const BasicMatrix<T>&,                \
                                        const BasicSkewParams<T>&,            \
                                        const BasicMatrix<T>&,                \
                                        const ScalingMatrix&);                \
  template BasicSkewParams<T> block_diag_from_angles<T>(                      \
      std::size_t, std::span<const double>);                                  \
  template std::pair<BasicSkewParams<T>, ScalingMatrix> init_block_diag<T>(   \
      std::size_t, std::size_t, Rng&);

SCORNN_INSTANTIATE_CAYLEY(float)
SCORNN_INSTANTIATE_CAYLEY(double)
SCORNN_INSTANTIATE_CAYLEY(long double)

#undef SCORNN_INSTANTIATE_CAYLEY

}  // namespace scornn
