#pragma once

// Scaled Cayley parametrization of orthogonal matrices,
//
//     W = (I + A)^{-1} (I - A) D,
//
// with A skew-symmetric and D a fixed diagonal of +-1 entries. Every
// orthogonal W is reachable with |a_ij| <= 1 for a suitable D, and the
// parameter space (skew matrices) is closed under addition, so any additive
// optimizer keeps W exactly orthogonal up to the rounding of one transform.

#include <concepts>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "scornn/linalg.hpp"
#include "scornn/rng.hpp"

namespace scornn {

/// The n(n-1)/2 free entries of a skew-symmetric A. Pairs (i, j), i > j, are
/// enumerated row-major over the strict lower triangle: (1,0), (2,0), (2,1),
/// (3,0), ... and entry k holds A(j, i) = -A(i, j), so for n = 2 the single
/// value s materializes as [[0, s], [-s, 0]].
template <std::floating_point T>
class BasicSkewParams {
 public:
  BasicSkewParams() = default;
  explicit BasicSkewParams(std::size_t n) : n_(n), v_(packed_size(n), T(0)) {}
  BasicSkewParams(std::size_t n, std::vector<T> values);

  static constexpr std::size_t packed_size(std::size_t n) {
    return n < 2 ? 0 : n * (n - 1) / 2;
  }
  /// Packed position of the pair (i, j), i > j.
  static constexpr std::size_t index(std::size_t i, std::size_t j) {
    return i * (i - 1) / 2 + j;
  }

  std::size_t dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return v_.size(); }
  std::span<T> values() noexcept { return v_; }
  std::span<const T> values() const noexcept { return v_; }
  T& operator[](std::size_t k) { return v_[k]; }
  const T& operator[](std::size_t k) const { return v_[k]; }

  bool operator==(const BasicSkewParams&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> v_;
};

using SkewParams = BasicSkewParams<Real>;

/// Fixed diagonal D. The -1 entries occupy the first rho positions when
/// built with `with_rho`.
class ScalingMatrix {
 public:
  ScalingMatrix() = default;
  /// Arbitrary sign pattern; every entry must be +1 or -1.
  explicit ScalingMatrix(std::vector<int> signs);

  static ScalingMatrix with_rho(std::size_t n, std::size_t rho);
  static ScalingMatrix identity(std::size_t n) { return with_rho(n, 0); }

  std::size_t dim() const noexcept { return signs_.size(); }
  std::size_t rho() const noexcept { return rho_; }
  std::span<const int> signs() const noexcept { return signs_; }
  int operator[](std::size_t i) const { return signs_[i]; }

  template <std::floating_point T>
  BasicMatrix<T> as_matrix() const;

  bool operator==(const ScalingMatrix&) const = default;

 private:
  std::vector<int> signs_;
  std::size_t rho_ = 0;
};

/// Dense A with Aᵀ = -A exactly and a zero diagonal.
template <std::floating_point T>
BasicMatrix<T> materialize(const BasicSkewParams<T>& p);

/// Packs the skew part (M - Mᵀ)/2 of a square matrix. For an exactly skew M
/// this is the inverse of `materialize`.
template <std::floating_point T>
BasicSkewParams<T> pack_skew(const BasicMatrix<T>& m);

template <std::floating_point T>
BasicMatrix<T> scaled_cayley(const BasicSkewParams<T>& a, const ScalingMatrix& d);

/// A = (I - WD)(I + WD)^{-1}. Throws SingularMatrixError when WD has an
/// eigenvalue at -1, i.e. when D is the wrong scaling for this W.
template <std::floating_point T>
BasicSkewParams<T> inverse_scaled_cayley(const BasicMatrix<T>& w,
                                         const ScalingMatrix& d);

/// Gradient of a loss with respect to the packed skew entries, given the
/// gradient with respect to W. Forms V = (I + A)^{-T} dL/dW (D + Wᵀ) once and
/// reads the packed entries of Vᵀ - V, so the result is skew by construction.
template <std::floating_point T>
BasicSkewParams<T> grad_skew(const BasicMatrix<T>& dl_dw,
                             const BasicSkewParams<T>& a,
                             const BasicMatrix<T>& w, const ScalingMatrix& d);

/// Block-diagonal start: floor(n/2) blocks [[0, s], [-s, 0]] with
/// s = sqrt((1 - cos t) / (1 + cos t)), t ~ U[0, pi/2].
template <std::floating_point T>
std::pair<BasicSkewParams<T>, ScalingMatrix> init_block_diag(std::size_t n,
                                                             std::size_t rho,
                                                             Rng& rng);

/// Same layout with the block angles given explicitly (floor(n/2) of them).
template <std::floating_point T>
BasicSkewParams<T> block_diag_from_angles(std::size_t n,
                                          std::span<const double> angles);

}  // namespace scornn
