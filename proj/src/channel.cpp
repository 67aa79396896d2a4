#include "rsma/channel.hpp"

#include <string>

namespace rsma {

namespace {

ComplexMatrix complex_gaussian(Rng& rng, Eigen::Index m, Eigen::Index k,
                               double variance) {
  const double part_std = std::sqrt(variance / 2.0);
  ComplexMatrix out(m, k);
  for (Eigen::Index col = 0; col < k; ++col) {
    for (Eigen::Index row = 0; row < m; ++row) {
      const double re = rng.normal();
      const double im = rng.normal();
      out(row, col) = {part_std * re, part_std * im};
    }
  }
  return out;
}

}  // namespace

double error_variance_per_entry(double p_t_linear, Eigen::Index m) {
  return std::pow(p_t_linear, kErrorPowerExponent) / static_cast<double>(m);
}

ComplexMatrix sample_true_channel(Rng& rng, Eigen::Index m, Eigen::Index k) {
  if (k < 1 || m < k) {
    throw std::invalid_argument("sample_true_channel: need m >= k >= 1, got m=" +
                                std::to_string(m) + " k=" + std::to_string(k));
  }
  return complex_gaussian(rng, m, k, 1.0);
}

ChannelRealization apply_estimation_error(const ComplexMatrix& true_channel,
                                          double p_t_linear, Rng& rng,
                                          bool perfect_csit) {
  if (!(p_t_linear > 0.0) || !std::isfinite(p_t_linear)) {
    throw std::invalid_argument(
        "apply_estimation_error: power must be positive and finite");
  }
  const Eigen::Index m = true_channel.rows();
  const ComplexMatrix error =
      complex_gaussian(rng, m, true_channel.cols(),
                       error_variance_per_entry(p_t_linear, m));
  ChannelRealization out;
  out.true_channel = true_channel;
  out.estimated_channel = perfect_csit ? true_channel : true_channel + error;
  out.p_t_linear = p_t_linear;
  return out;
}

ChannelProcess::ChannelProcess(Eigen::Index m, Eigen::Index k,
                               double p_t_linear, const ChannelConfig& config)
    : m_(m), k_(k), p_t_linear_(p_t_linear), config_(config) {
  if (k < 1 || m < k) {
    throw std::invalid_argument("ChannelProcess: need m >= k >= 1");
  }
  if (!(config.gauss_markov_rho >= 0.0 && config.gauss_markov_rho < 1.0)) {
    throw std::invalid_argument("ChannelProcess: rho must lie in [0, 1)");
  }
}

const ChannelRealization& ChannelProcess::advance(Rng& rng) {
  ComplexMatrix fresh = sample_true_channel(rng, m_, k_);
  const double rho = config_.gauss_markov_rho;
  if (started_ && rho > 0.0) {
    fresh = rho * current_.true_channel + std::sqrt(1.0 - rho * rho) * fresh;
  }
  current_ = apply_estimation_error(fresh, p_t_linear_, rng,
                                    config_.perfect_csit);
  started_ = true;
  return current_;
}

}  // namespace rsma
