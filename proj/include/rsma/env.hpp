#ifndef RSMA_ENV_HPP_
#define RSMA_ENV_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "rsma/channel.hpp"
#include "rsma/phy.hpp"
#include "rsma/rng.hpp"
#include "rsma/types.hpp"

namespace rsma {

enum class AccessMode { kRsma, kSdma };

std::string to_string(AccessMode mode);
AccessMode parse_access_mode(std::string_view text);

struct EnvConfig {
  Eigen::Index m = 4;
  Eigen::Index k = 4;
  double p_t_dbm = 40.0;
  VectorXd qos = VectorXd::Constant(4, 0.1);
  int episode_len = 200;
  AccessMode mode = AccessMode::kRsma;
  bool perfect_csit = false;
  double gauss_markov_rho = 0.0;

  double p_t_linear() const { return dbm_to_linear(p_t_dbm); }
  // Throws ConfigError when an invariant does not hold.
  void validate() const;
};

// Same configuration with the common stream removed.
EnvConfig sdma_variant(EnvConfig config);

// SINR feedback [g_1^c, g_1^p, ..., g_K^c, g_K^p].
using Observation = VectorXd;

Observation interleave_sinrs(const VectorXd& gamma_c, const VectorXd& gamma_p);

// Unconstrained action. In SDMA mode power_logits has length K and
// split_logits is empty.
struct RawAction {
  VectorXd power_logits;
  VectorXd split_logits;
};

// Number of logits a policy must emit: 2K+1 for RSMA, K for SDMA.
Eigen::Index action_dim(Eigen::Index k, AccessMode mode);

// Splits a flat logit vector [power..., split...] into a RawAction.
RawAction unflatten_action(const VectorXd& flat, Eigen::Index k,
                           AccessMode mode);

// Maps logits onto the simplex constraints. mu = Softmax(power_logits),
// C = Softmax(split_logits) * R_c(mu) with R_c evaluated on `channel`.
Allocation action_to_allocation(const RawAction& raw, AccessMode mode,
                                const ComplexMatrix& channel,
                                const Precoders& precoders, double p_t_linear);

// Allocation from explicit power fractions and common-rate split fractions.
Allocation fractions_to_allocation(const VectorXd& mu, const VectorXd& split,
                                   const ComplexMatrix& channel,
                                   const Precoders& precoders,
                                   double p_t_linear);

// Fraction of users whose total rate falls strictly below its QoS target.
double penalty(const VectorXd& total_rates, const VectorXd& qos);

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  double sum_rate = 0.0;
  double penalty = 0.0;
  int qos_violations = 0;
  Allocation allocation;
  bool done = false;
};

// Block-fading downlink environment. Not thread-safe; one instance per worker.
class Environment {
 public:
  Environment(EnvConfig config, Rng rng);

  const EnvConfig& config() const { return config_; }
  Eigen::Index observation_dim() const { return 2 * config_.k; }
  Eigen::Index action_dim() const { return rsma::action_dim(config_.k, config_.mode); }

  // Draws a fresh channel, evaluates SINRs under a uniform allocation.
  Observation reset();
  // Reseeds before resetting.
  Observation reset(Rng rng);

  StepOutcome step(const RawAction& raw);
  StepOutcome step(const VectorXd& flat_logits);
  // Discrete-action entry point: power fractions mu (length K+1) and split
  // fractions (length K).
  StepOutcome step_fractions(const VectorXd& mu, const VectorXd& split);

  // Replaces the current channel; the next step is evaluated on it.
  void override_channel(const ChannelRealization& channel);

  const ChannelRealization& channel() const { return channel_; }
  const Precoders& precoders() const { return precoders_; }
  int steps_taken() const { return step_count_; }
  bool done() const { return started_ && step_count_ >= config_.episode_len; }
  VectorXd uniform_mu() const;

 private:
  StepOutcome finish_step(const Allocation& alloc);
  void advance_channel();
  Observation observe(const VectorXd& mu) const;

  EnvConfig config_;
  double p_t_linear_;
  Rng rng_;
  ChannelProcess process_;
  ChannelRealization channel_;
  Precoders precoders_;
  int step_count_ = 0;
  bool started_ = false;
};

}  // namespace rsma

#endif  // RSMA_ENV_HPP_
