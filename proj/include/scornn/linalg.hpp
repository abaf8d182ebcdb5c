#pragma once

// Dense row-major matrices and the handful of kernels the rest of the
// library is built from: products, LU solves, norms and elementwise ops.
//
// All kernels use a fixed loop order, so results are bitwise reproducible
// for a given input on a given build.

#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scornn {

#ifdef SCORNN_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <std::floating_point T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;

  /// Zero-filled rows x cols matrix.
  BasicMatrix(std::size_t rows, std::size_t cols);

  /// Takes ownership of row-major entries; rejects a size mismatch or any
  /// NaN/Inf entry.
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> entries);

  /// Nested-list literal, one inner list per row.
  BasicMatrix(std::initializer_list<std::initializer_list<T>> rows);

  static BasicMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<T> entries() noexcept { return data_; }
  std::span<const T> entries() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  void fill(T value);

  /// Exact (bitwise for finite values) equality of shape and entries.
  bool operator==(const BasicMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<Real>;

std::string shape_string(std::size_t rows, std::size_t cols);

// Products. `out` variants overwrite or accumulate into a preallocated
// result and are what the recurrent loops use.
template <std::floating_point T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
template <std::floating_point T>
void matmul_into(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                 BasicMatrix<T>& out);
template <std::floating_point T>
void matmul_accumulate(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                       BasicMatrix<T>& out);

template <std::floating_point T>
BasicMatrix<T> transpose(const BasicMatrix<T>& m);
template <std::floating_point T>
void transpose_into(const BasicMatrix<T>& m, BasicMatrix<T>& out);

template <std::floating_point T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
template <std::floating_point T>
BasicMatrix<T> sub(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
template <std::floating_point T>
BasicMatrix<T> scale(const BasicMatrix<T>& m, T factor);
/// y += alpha * x
template <std::floating_point T>
void axpy(T alpha, const BasicMatrix<T>& x, BasicMatrix<T>& y);

template <std::floating_point T>
T fro_norm(const BasicMatrix<T>& m);
template <std::floating_point T>
T max_abs(const BasicMatrix<T>& m);
template <std::floating_point T>
T max_abs_diff(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
template <std::floating_point T>
bool all_finite(std::span<const T> values);

/// LU factorization with partial pivoting, P·M = L·U with unit-lower L.
/// A pivot no larger than n·eps·max|M| after pivoting is treated as zero.
template <std::floating_point T>
class LuFactorization {
 public:
  explicit LuFactorization(const BasicMatrix<T>& m);

  std::size_t dim() const noexcept { return n_; }

  /// X with M·X = rhs.
  BasicMatrix<T> solve(const BasicMatrix<T>& rhs) const;
  /// X with Mᵀ·X = rhs, reusing the same factors.
  BasicMatrix<T> solve_transposed(const BasicMatrix<T>& rhs) const;

 private:
  std::size_t n_ = 0;
  BasicMatrix<T> lu_;
  std::vector<std::size_t> perm_;  // row i of P·M is row perm_[i] of M
};

template <std::floating_point T>
BasicMatrix<T> solve(const BasicMatrix<T>& m, const BasicMatrix<T>& rhs);

}  // namespace scornn
