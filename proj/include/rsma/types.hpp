#ifndef RSMA_TYPES_HPP_
#define RSMA_TYPES_HPP_

#include <complex>

#include <Eigen/Dense>

namespace rsma {

template <typename Scalar>
using ComplexMatrixX =
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ComplexVectorX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using ComplexMatrix = ComplexMatrixX<double>;
using ComplexVector = ComplexVectorX<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

}  // namespace rsma

#endif  // RSMA_TYPES_HPP_
