#pragma once

// Multiplicative Cayley retraction on the orthogonal group, the real
// counterpart of the full-capacity uRNN update:
//
//     W <- (I + lr/2 B)^{-1} (I - lr/2 B) W,   B = G Wᵀ - W Gᵀ.
//
// Orthogonality is exact only in exact arithmetic; in floating point the
// error of every step compounds. That drift is what this module exists to
// measure, so nothing here ever re-orthogonalizes W.

#include <concepts>
#include <cstdint>

#include "scornn/linalg.hpp"

namespace scornn {

template <std::floating_point T>
struct StiefelState {
  BasicMatrix<T> w;
  std::uint64_t step = 0;
};

/// B = G Wᵀ - W Gᵀ, exactly skew: the product G Wᵀ is formed once and B is
/// its difference with its own transpose.
template <std::floating_point T>
BasicMatrix<T> descent_direction(const BasicMatrix<T>& g, const BasicMatrix<T>& w);

template <std::floating_point T>
StiefelState<T> multiplicative_update(const StiefelState<T>& s,
                                      const BasicMatrix<T>& b, T lr);

/// ‖WᵀW - I‖_F.
template <std::floating_point T>
T orthogonality_score(const BasicMatrix<T>& w);

}  // namespace scornn
