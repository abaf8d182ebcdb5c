#include "scornn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace scornn {

namespace {

template <std::floating_point T>
void require_same_shape(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + shape_string(a.rows(), a.cols()) +
                     " vs " + shape_string(b.rows(), b.cols()));
  }
}

template <std::floating_point T>
void require_product_shape(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                           const BasicMatrix<T>& out, const char* op) {
  if (a.cols() != b.rows()) {
    throw ShapeError(std::string(op) + ": inner dimensions " +
                     shape_string(a.rows(), a.cols()) + " * " +
                     shape_string(b.rows(), b.cols()));
  }
  if (out.rows() != a.rows() || out.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": output is " +
                     shape_string(out.rows(), out.cols()) + ", expected " +
                     shape_string(a.rows(), b.cols()));
  }
}

// out(i, :) += a(i, k) * b(k, :) in ascending k. Each out entry therefore
// sums its products in the same order as the textbook triple loop.
template <std::floating_point T>
void accumulate_product(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                        BasicMatrix<T>& out) {
  const std::size_t inner = a.cols();
  const std::size_t width = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* __restrict out_row = out.data() + i * width;
    const T* a_row = a.data() + i * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = a_row[k];
      if (aik == T(0)) continue;
      const T* __restrict b_row = b.data() + k * width;
      for (std::size_t j = 0; j < width; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

}  // namespace

std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <std::floating_point T>
BasicMatrix<T>::BasicMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, T(0)) {}

template <std::floating_point T>
BasicMatrix<T>::BasicMatrix(std::size_t rows, std::size_t cols,
                            std::vector<T> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix " + shape_string(rows, cols) + " given " +
                     std::to_string(data_.size()) + " entries");
  }
  if (!all_finite<T>(data_)) {
    throw NonFiniteError("matrix " + shape_string(rows, cols) +
                         " constructed with a non-finite entry");
  }
}

template <std::floating_point T>
BasicMatrix<T>::BasicMatrix(std::initializer_list<std::initializer_list<T>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  if (!all_finite<T>(data_)) {
    throw NonFiniteError("matrix literal with a non-finite entry");
  }
}

template <std::floating_point T>
BasicMatrix<T> BasicMatrix<T>::identity(std::size_t n) {
  BasicMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
  return m;
}

template <std::floating_point T>
void BasicMatrix<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <std::floating_point T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  BasicMatrix<T> out(a.rows(), b.cols());
  require_product_shape(a, b, out, "matmul");
  accumulate_product(a, b, out);
  return out;
}

template <std::floating_point T>
void matmul_into(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                 BasicMatrix<T>& out) {
  require_product_shape(a, b, out, "matmul_into");
  out.fill(T(0));
  accumulate_product(a, b, out);
}

template <std::floating_point T>
void matmul_accumulate(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                       BasicMatrix<T>& out) {
  require_product_shape(a, b, out, "matmul_accumulate");
  accumulate_product(a, b, out);
}

template <std::floating_point T>
BasicMatrix<T> transpose(const BasicMatrix<T>& m) {
  BasicMatrix<T> out(m.cols(), m.rows());
  transpose_into(m, out);
  return out;
}

template <std::floating_point T>
void transpose_into(const BasicMatrix<T>& m, BasicMatrix<T>& out) {
  if (out.rows() != m.cols() || out.cols() != m.rows()) {
    throw ShapeError("transpose_into: output is " +
                     shape_string(out.rows(), out.cols()));
  }
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
}

template <std::floating_point T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require_same_shape(a, b, "add");
  BasicMatrix<T> out = a;
  auto o = out.entries();
  auto y = b.entries();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  return out;
}

template <std::floating_point T>
BasicMatrix<T> sub(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require_same_shape(a, b, "sub");
  BasicMatrix<T> out = a;
  auto o = out.entries();
  auto y = b.entries();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
  return out;
}

template <std::floating_point T>
BasicMatrix<T> scale(const BasicMatrix<T>& m, T factor) {
  BasicMatrix<T> out = m;
  for (T& x : out.entries()) x *= factor;
  return out;
}

template <std::floating_point T>
void axpy(T alpha, const BasicMatrix<T>& x, BasicMatrix<T>& y) {
  require_same_shape(x, y, "axpy");
  auto xs = x.entries();
  auto ys = y.entries();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * xs[i];
}

template <std::floating_point T>
T fro_norm(const BasicMatrix<T>& m) {
  T sum = 0;
  for (T x : m.entries()) sum += x * x;
  return std::sqrt(sum);
}

template <std::floating_point T>
T max_abs(const BasicMatrix<T>& m) {
  T best = 0;
  for (T x : m.entries()) best = std::max(best, std::abs(x));
  return best;
}

template <std::floating_point T>
T max_abs_diff(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T best = 0;
  auto xs = a.entries();
  auto ys = b.entries();
  for (std::size_t i = 0; i < xs.size(); ++i)
    best = std::max(best, std::abs(xs[i] - ys[i]));
  return best;
}

template <std::floating_point T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(),
                     [](T x) { return std::isfinite(x); });
}

template <std::floating_point T>
LuFactorization<T>::LuFactorization(const BasicMatrix<T>& m)
    : n_(m.rows()), lu_(m), perm_(m.rows()) {
  if (!m.is_square()) {
    throw ShapeError("LU of non-square " + shape_string(m.rows(), m.cols()));
  }
  for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;

  const T tiny = static_cast<T>(n_) * std::numeric_limits<T>::epsilon() *
                 max_abs(m);
  for (std::size_t k = 0; k < n_; ++k) {
    std::size_t pivot = k;
    T best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n_; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        pivot = i;
      }
    }
    if (best <= tiny) {
      throw SingularMatrixError("LU: zero pivot at column " + std::to_string(k) +
                                " of " + shape_string(n_, n_));
    }
    if (pivot != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(),
                       lu_.row(pivot).begin());
      std::swap(perm_[k], perm_[pivot]);
    }
    const T inv = T(1) / lu_(k, k);
    for (std::size_t i = k + 1; i < n_; ++i) {
      const T factor = lu_(i, k) * inv;
      lu_(i, k) = factor;
      if (factor == T(0)) continue;
      T* __restrict dst = lu_.data() + i * n_;
      const T* __restrict src = lu_.data() + k * n_;
      for (std::size_t j = k + 1; j < n_; ++j) dst[j] -= factor * src[j];
    }
  }
}

template <std::floating_point T>
BasicMatrix<T> LuFactorization<T>::solve(const BasicMatrix<T>& rhs) const {
  if (rhs.rows() != n_) {
    throw ShapeError("LU solve: rhs " + shape_string(rhs.rows(), rhs.cols()) +
                     " for system of order " + std::to_string(n_));
  }
  const std::size_t w = rhs.cols();
  BasicMatrix<T> x(n_, w);
  for (std::size_t i = 0; i < n_; ++i) {
    auto src = rhs.row(perm_[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  // L y = P b, row-oriented forward substitution.
  for (std::size_t i = 0; i < n_; ++i) {
    T* __restrict xi = x.data() + i * w;
    for (std::size_t k = 0; k < i; ++k) {
      const T l = lu_(i, k);
      if (l == T(0)) continue;
      const T* __restrict xk = x.data() + k * w;
      for (std::size_t j = 0; j < w; ++j) xi[j] -= l * xk[j];
    }
  }
  // U x = y.
  for (std::size_t ii = n_; ii-- > 0;) {
    T* __restrict xi = x.data() + ii * w;
    for (std::size_t k = ii + 1; k < n_; ++k) {
      const T u = lu_(ii, k);
      if (u == T(0)) continue;
      const T* __restrict xk = x.data() + k * w;
      for (std::size_t j = 0; j < w; ++j) xi[j] -= u * xk[j];
    }
    const T inv = T(1) / lu_(ii, ii);
    for (std::size_t j = 0; j < w; ++j) xi[j] *= inv;
  }
  return x;
}

template <std::floating_point T>
BasicMatrix<T> LuFactorization<T>::solve_transposed(
    const BasicMatrix<T>& rhs) const {
  if (rhs.rows() != n_) {
    throw ShapeError("LU transposed solve: rhs " +
                     shape_string(rhs.rows(), rhs.cols()) +
                     " for system of order " + std::to_string(n_));
  }
  // Mᵀ = Uᵀ Lᵀ P, so solve Uᵀ y = b, then Lᵀ z = y, then x = Pᵀ z.
  const std::size_t w = rhs.cols();
  BasicMatrix<T> z = rhs;
  for (std::size_t i = 0; i < n_; ++i) {
    T* __restrict zi = z.data() + i * w;
    const T inv = T(1) / lu_(i, i);
    for (std::size_t j = 0; j < w; ++j) zi[j] *= inv;
    for (std::size_t k = i + 1; k < n_; ++k) {
      const T u = lu_(i, k);
      if (u == T(0)) continue;
      T* __restrict zk = z.data() + k * w;
      for (std::size_t j = 0; j < w; ++j) zk[j] -= u * zi[j];
    }
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    const T* __restrict zi = z.data() + ii * w;
    for (std::size_t k = 0; k < ii; ++k) {
      const T l = lu_(ii, k);
      if (l == T(0)) continue;
      T* __restrict zk = z.data() + k * w;
      for (std::size_t j = 0; j < w; ++j) zk[j] -= l * zi[j];
    }
  }
  BasicMatrix<T> x(n_, w);
  for (std::size_t i = 0; i < n_; ++i) {
    auto src = z.row(i);
    std::copy(src.begin(), src.end(), x.row(perm_[i]).begin());
  }
  return x;
}

template <std::floating_point T>
BasicMatrix<T> solve(const BasicMatrix<T>& m, const BasicMatrix<T>& rhs) {
  return LuFactorization<T>(m).solve(rhs);
}

#define SCORNN_INSTANTIATE_LINALG(T)                                          \
  template class BasicMatrix<T>;                                              \
  template class LuFactorization<T>;                                          \
  template BasicMatrix<T> matmul(const BasicMatrix<T>&, const BasicMatrix<T>&); \
  template void matmul_into(const BasicMatrix<T>&, const BasicMatrix<T>&,     \
                            BasicMatrix<T>&);                                 \
  template void matmul_accumulate(const BasicMatrix<T>&,                      \
                                  const BasicMatrix<T>&, BasicMatrix<T>&);    \
  template BasicMatrix<T> transpose(const BasicMatrix<T>&);                   \
  template void transpose_into(const BasicMatrix<T>&, BasicMatrix<T>&);       \
  template BasicMatrix<T> add(const BasicMatrix<T>&, const BasicMatrix<T>&);  \
  template BasicMatrix<T> sub(const BasicMatrix<T>&, const BasicMatrix<T>&);  \
  template BasicMatrix<T> scale(const BasicMatrix<T>&, T);                    \
  template void axpy(T, const BasicMatrix<T>&, BasicMatrix<T>&);              \
  template T fro_norm(const BasicMatrix<T>&);                                 \
  template T max_abs(const BasicMatrix<T>&);                                  \
  template T max_abs_diff(const BasicMatrix<T>&, const BasicMatrix<T>&);      \
  template bool all_finite(std::span<const T>);                               \
  template BasicMatrix<T> solve(const BasicMatrix<T>&, const BasicMatrix<T>&);

SCORNN_INSTANTIATE_LINALG(float)
SCORNN_INSTANTIATE_LINALG(double)
SCORNN_INSTANTIATE_LINALG(long double)

#undef SCORNN_INSTANTIATE_LINALG

}  // namespace scornn
