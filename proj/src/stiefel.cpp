#include "scornn/stiefel.hpp"

#include <string>

namespace scornn {

template <std::floating_point T>
BasicMatrix<T> descent_direction(const BasicMatrix<T>& g, const BasicMatrix<T>& w) {
  if (g.rows() != w.rows() || g.cols() != w.cols() || !w.is_square()) {
    throw ShapeError("descent_direction: G " + shape_string(g.rows(), g.cols()) +
                     ", W " + shape_string(w.rows(), w.cols()));
  }
  const BasicMatrix<T> gwt = matmul(g, transpose(w));
  return sub(gwt, transpose(gwt));
}

template <std::floating_point T>
StiefelState<T> multiplicative_update(const StiefelState<T>& s,
                                      const BasicMatrix<T>& b, T lr) {
  const std::size_t n = s.w.rows();
  if (!b.is_square() || b.rows() != n) {
    throw ShapeError("multiplicative_update: B " +
                     shape_string(b.rows(), b.cols()) + " for W of order " +
                     std::to_string(n));
  }
  const T half = lr / T(2);
  BasicMatrix<T> plus = scale(b, half);
  BasicMatrix<T> minus = scale(b, -half);
  for (std::size_t i = 0; i < n; ++i) {
    plus(i, i) += T(1);
    minus(i, i) += T(1);
  }
  StiefelState<T> next;
  next.w = LuFactorization<T>(plus).solve(matmul(minus, s.w));
  next.step = s.step + 1;
  return next;
}

template <std::floating_point T>
T orthogonality_score(const BasicMatrix<T>& w) {
  if (!w.is_square()) {
    throw ShapeError("orthogonality_score of " + shape_string(w.rows(), w.cols()));
  }
  BasicMatrix<T> gram = matmul(transpose(w), w);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) -= T(1);
  return fro_norm(gram);
}

#define SCORNN_INSTANTIATE_STIEFEL(T)                                          \
  template struct StiefelState<T>;                                             \
  template BasicMatrix<T> descent_direction(const BasicMatrix<T>&,             \
                                            const BasicMatrix<T>&);            \
  template StiefelState<T> multiplicative_update(const StiefelState<T>&,       \
                                                 const BasicMatrix<T>&, T);    \
  template T orthogonality_score(const BasicMatrix<T>&);

SCORNN_INSTANTIATE_STIEFEL(float)
SCORNN_INSTANTIATE_STIEFEL(double)
SCORNN_INSTANTIATE_STIEFEL(long double)

#undef SCORNN_INSTANTIATE_STIEFEL

}  // namespace scornn
