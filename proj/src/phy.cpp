#include "rsma/phy.hpp"

namespace rsma {

RateReport evaluate_power_only(const ComplexMatrix& channel,
                               const Precoders& precoders, const VectorXd& mu,
                               double p_t_linear) {
  const SinrPair sinr = compute_sinrs(channel, precoders, mu, p_t_linear);
  RateReport report;
  report.gamma_c = sinr.common;
  report.gamma_p = sinr.priv;
  report.private_rates = sinr.priv.unaryExpr(
      [](double g) { return private_rate(g); });
  report.common_rate = common_rate(sinr.common);
  report.total_rates = report.private_rates;
  report.sum_rate = report.private_rates.sum();
  return report;
}

RateReport evaluate_rates(const ComplexMatrix& channel,
                          const Precoders& precoders, const Allocation& alloc,
                          double p_t_linear) {
  if (alloc.c.size() != channel.cols()) {
    throw std::invalid_argument("evaluate_rates: common split length mismatch");
  }
  RateReport report =
      evaluate_power_only(channel, precoders, alloc.mu, p_t_linear);
  report.total_rates = alloc.c + report.private_rates;
  report.sum_rate = sum_rate(alloc.c, report.private_rates);
  return report;
}

FeasibilityReport check_feasibility(const Allocation& alloc,
                                    const RateReport& report,
                                    const VectorXd& qos) {
  FeasibilityReport out;
  out.power_ok = alloc.mu.sum() <= 1.0 + kFeasibilityTolerance;
  out.common_split_ok =
      alloc.c.sum() <= report.common_rate + kFeasibilityTolerance;
  out.nonneg_ok = alloc.c.size() == 0 || alloc.c.minCoeff() >= 0.0;
  out.qos_ok.resize(static_cast<std::size_t>(qos.size()));
  for (Eigen::Index k = 0; k < qos.size(); ++k) {
    const double total = alloc.c(k) + report.private_rates(k);
    out.qos_ok[static_cast<std::size_t>(k)] = total >= qos(k);
  }
  return out;
}

}  // namespace rsma
