#ifndef RSMA_NUMERIC_HPP_
#define RSMA_NUMERIC_HPP_

#include <cmath>

#include "rsma/types.hpp"

namespace rsma {

// Softmax with max subtraction.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace rsma

#endif  // RSMA_NUMERIC_HPP_
