#ifndef RSMA_CHANNEL_HPP_
#define RSMA_CHANNEL_HPP_

#include <cmath>
#include <stdexcept>

#include "rsma/rng.hpp"
#include "rsma/types.hpp"

namespace rsma {

// Exponent of the estimation-error energy law E{|e_k|^2} = P_t^-0.6.
inline constexpr double kErrorPowerExponent = -0.6;

// True channel h_k (column k) and the base station's estimate of it, for M
// antennas (rows) and K users (columns).
struct ChannelRealization {
  ComplexMatrix true_channel;
  ComplexMatrix estimated_channel;
  double p_t_linear = 1.0;

  Eigen::Index antennas() const { return true_channel.rows(); }
  Eigen::Index users() const { return true_channel.cols(); }
};

struct ChannelConfig {
  std::uint64_t seed = 1;
  bool perfect_csit = false;
  // First-order Gauss-Markov correlation between consecutive steps.
  // 0 gives independent block fading.
  double gauss_markov_rho = 0.0;
};

template <typename Scalar>
Scalar dbm_to_linear(Scalar p_dbm) {
  if (!std::isfinite(p_dbm)) {
    throw std::invalid_argument("dbm_to_linear: power must be finite");
  }
  return std::pow(Scalar(10), p_dbm / Scalar(10));
}

// Per-entry error variance for an M-antenna column at linear power p_t.
double error_variance_per_entry(double p_t_linear, Eigen::Index m);

// M x K matrix of i.i.d. CN(0, 1) entries, drawn column-major.
ComplexMatrix sample_true_channel(Rng& rng, Eigen::Index m, Eigen::Index k);

// Adds CN(0, p_t^-0.6 / M) noise to every entry of the true channel. The error
// is always drawn, so the rng advances identically whether or not
// perfect_csit discards it.
ChannelRealization apply_estimation_error(const ComplexMatrix& true_channel,
                                          double p_t_linear, Rng& rng,
                                          bool perfect_csit = false);

// Time-varying channel. Each advance() yields a fresh realization; with
// rho > 0 the true channel follows H' = rho H + sqrt(1 - rho^2) G.
class ChannelProcess {
 public:
  ChannelProcess(Eigen::Index m, Eigen::Index k, double p_t_linear,
                 const ChannelConfig& config);

  const ChannelRealization& advance(Rng& rng);
  const ChannelRealization& current() const { return current_; }
  bool started() const { return started_; }

 private:
  Eigen::Index m_;
  Eigen::Index k_;
  double p_t_linear_;
  ChannelConfig config_;
  ChannelRealization current_;
  bool started_ = false;
};

}  // namespace rsma

#endif  // RSMA_CHANNEL_HPP_
