#ifndef RSMA_PHY_HPP_
#define RSMA_PHY_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/SVD>

#include "rsma/errors.hpp"
#include "rsma/types.hpp"

namespace rsma {

// Absolute slack on the inequality constraints of the sum-rate problem.
inline constexpr double kFeasibilityTolerance = 1e-9;

// Unit-norm beamformers: w_c for the common stream, column k of `priv` for
// user k's private stream.
template <typename Scalar>
struct PrecodersT {
  ComplexVectorX<Scalar> common;
  ComplexMatrixX<Scalar> priv;

  // [w_c, w_1, ..., w_K] as an M x (K+1) matrix.
  ComplexMatrixX<Scalar> stacked() const {
    ComplexMatrixX<Scalar> out(common.size(), priv.cols() + 1);
    out.col(0) = common;
    out.rightCols(priv.cols()) = priv;
    return out;
  }
};
using Precoders = PrecodersT<double>;

template <typename Scalar>
struct SinrPairT {
  VectorX<Scalar> common;   // gamma_k^c
  VectorX<Scalar> priv;     // gamma_k^p
};
using SinrPair = SinrPairT<double>;

// mu = [mu_c, mu_1..mu_K] power fractions, c = [C_1..C_K] common-rate shares.
struct Allocation {
  VectorXd mu;
  VectorXd c;
};

struct RateReport {
  VectorXd gamma_c;
  VectorXd gamma_p;
  VectorXd private_rates;
  double common_rate = 0.0;
  VectorXd total_rates;
  double sum_rate = 0.0;
};

struct FeasibilityReport {
  bool power_ok = false;
  bool common_split_ok = false;
  std::vector<bool> qos_ok;
  bool nonneg_ok = false;

  bool all_ok() const {
    bool ok = power_ok && common_split_ok && nonneg_ok;
    for (bool q : qos_ok) ok = ok && q;
    return ok;
  }
};

namespace detail {

// Rotates v so its first entry with magnitude above tol is real positive.
template <typename Scalar>
void normalize_phase(ComplexVectorX<Scalar>& v, Scalar tol) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Scalar mag = std::abs(v(i));
    if (mag > tol) {
      v *= std::conj(v(i)) / mag;
      v(i) = {mag, Scalar(0)};
      return;
    }
  }
}

}  // namespace detail

// Maximum-ratio private precoders and the leading left singular vector of the
// estimate as the common precoder.
//
// When the top singular value is repeated, w_c is the projection of the
// lowest-index basis vector e_i that is not orthogonal to the leading
// subspace. The phase is fixed so the first nonzero entry is real positive.
template <typename Derived>
PrecodersT<typename Eigen::NumTraits<typename Derived::Scalar>::Real>
compute_precoders(const Eigen::MatrixBase<Derived>& estimated_channel) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  using CMat = ComplexMatrixX<Real>;
  const Eigen::Index m = estimated_channel.rows();
  const Eigen::Index k = estimated_channel.cols();
  if (m < 1 || k < 1) {
    throw std::invalid_argument("compute_precoders: empty channel matrix");
  }
  const CMat h = estimated_channel.template cast<std::complex<Real>>();

  PrecodersT<Real> out;
  out.priv.resize(m, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Real norm = h.col(j).norm();
    if (!(norm > Real(0)) || !std::isfinite(norm)) {
      throw DegenerateChannelError("compute_precoders: zero or non-finite column " +
                                   std::to_string(j));
    }
    out.priv.col(j) = h.col(j) / norm;
  }

  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeFullU);
  const auto& sigma = svd.singularValues();
  const CMat& u = svd.matrixU();
  const Real tie_tol = Real(1e-9) * std::max(Real(1), sigma(0));
  Eigen::Index multiplicity = 1;
  while (multiplicity < sigma.size() &&
         sigma(0) - sigma(multiplicity) <= tie_tol) {
    ++multiplicity;
  }

  ComplexVectorX<Real> wc = u.col(0);
  if (multiplicity > 1) {
    const auto basis = u.leftCols(multiplicity);
    for (Eigen::Index i = 0; i < m; ++i) {
      ComplexVectorX<Real> probe = ComplexVectorX<Real>::Zero(m);
      probe(i) = Real(1);
      ComplexVectorX<Real> proj = basis * (basis.adjoint() * probe);
      if (proj.norm() > Real(1e-6)) {
        wc = proj;
        break;
      }
    }
  }
  wc.normalize();
  detail::normalize_phase(wc, Real(1e-12));
  out.common = wc;
  return out;
}

// Common and private SINRs at every user under allocation mu, with unit noise:
//   gamma_k^c = mu_c P |h_k^H w_c|^2 / (sum_j mu_j P |h_k^H w_j|^2 + 1)
//   gamma_k^p = mu_k P |h_k^H w_k|^2 / (sum_{j != k} mu_j P |h_k^H w_j|^2 + 1)
template <typename Derived, typename MuDerived>
SinrPairT<typename Eigen::NumTraits<typename Derived::Scalar>::Real>
compute_sinrs(const Eigen::MatrixBase<Derived>& channel,
              const PrecodersT<typename Eigen::NumTraits<
                  typename Derived::Scalar>::Real>& precoders,
              const Eigen::MatrixBase<MuDerived>& mu,
              typename Eigen::NumTraits<typename Derived::Scalar>::Real p_t) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  const Eigen::Index m = channel.rows();
  const Eigen::Index k = channel.cols();
  if (precoders.common.size() != m || precoders.priv.rows() != m ||
      precoders.priv.cols() != k || mu.size() != k + 1) {
    throw std::invalid_argument("compute_sinrs: dimension mismatch");
  }
  if (!(p_t > Real(0))) {
    throw std::invalid_argument("compute_sinrs: power must be positive");
  }
  // gains(k, j) = |h_k^H w_j|^2 with column 0 the common precoder.
  const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> gains =
      (channel.adjoint() * precoders.stacked()).cwiseAbs2();
  const Eigen::Matrix<Real, Eigen::Dynamic, 1> mu_priv =
      mu.tail(k).template cast<Real>();
  const Eigen::Matrix<Real, Eigen::Dynamic, 1> private_power =
      p_t * (gains.rightCols(k) * mu_priv);
  const Eigen::Matrix<Real, Eigen::Dynamic, 1> own =
      p_t * gains.rightCols(k).diagonal().cwiseProduct(mu_priv);
  // Interference summed without the own term; subtracting it from the total
  // loses digits when one stream dominates.
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> cross = gains.rightCols(k);
  cross.diagonal().setZero();
  const Eigen::Matrix<Real, Eigen::Dynamic, 1> interference = p_t * (cross * mu_priv);

  SinrPairT<Real> out;
  out.common = (p_t * Real(mu(0)) * gains.col(0)).array() /
               (private_power.array() + Real(1));
  out.priv = own.array() / (interference.array() + Real(1));
  return out;
}

template <typename Scalar>
Scalar private_rate(Scalar gamma) {
  if (!(gamma >= Scalar(0))) {
    throw std::invalid_argument("private_rate: SINR must be nonnegative");
  }
  return std::log2(Scalar(1) + gamma);
}

// Rate decodable by every user: min_k log2(1 + gamma_k^c).
template <typename Derived>
typename Derived::Scalar common_rate(const Eigen::MatrixBase<Derived>& gamma_c) {
  using Scalar = typename Derived::Scalar;
  if (gamma_c.size() == 0) {
    throw std::invalid_argument("common_rate: empty SINR vector");
  }
  if (!(gamma_c.minCoeff() >= Scalar(0))) {
    throw std::invalid_argument("common_rate: SINRs must be nonnegative");
  }
  return std::log2(Scalar(1) + gamma_c.minCoeff());
}

template <typename DerivedC, typename DerivedR>
typename DerivedC::Scalar sum_rate(const Eigen::MatrixBase<DerivedC>& c,
                                   const Eigen::MatrixBase<DerivedR>& private_rates) {
  if (c.size() != private_rates.size()) {
    throw std::invalid_argument("sum_rate: length mismatch");
  }
  return c.sum() + private_rates.sum();
}

// Full rate evaluation for a given allocation.
RateReport evaluate_rates(const ComplexMatrix& channel,
                          const Precoders& precoders, const Allocation& alloc,
                          double p_t_linear);

// Rates that depend only on mu; c in the report is left empty and
// total_rates/sum_rate hold private rates only.
RateReport evaluate_power_only(const ComplexMatrix& channel,
                               const Precoders& precoders, const VectorXd& mu,
                               double p_t_linear);

FeasibilityReport check_feasibility(const Allocation& alloc,
                                    const RateReport& report,
                                    const VectorXd& qos);

}  // namespace rsma

#endif  // RSMA_PHY_HPP_
