#include "rsma/env.hpp"

#include <cmath>

#include "rsma/errors.hpp"
#include "rsma/numeric.hpp"

namespace rsma {

std::string to_string(AccessMode mode) {
  return mode == AccessMode::kRsma ? "rsma" : "sdma";
}

AccessMode parse_access_mode(std::string_view text) {
  if (text == "rsma") return AccessMode::kRsma;
  if (text == "sdma") return AccessMode::kSdma;
  throw ConfigError("unknown access mode '" + std::string(text) +
                    "' (expected rsma or sdma)");
}

void EnvConfig::validate() const {
  if (k < 1 || m < k) {
    throw ConfigError("env: need m >= k >= 1");
  }
  if (episode_len < 1) {
    throw ConfigError("env: episode_len must be >= 1");
  }
  if (!std::isfinite(p_t_dbm)) {
    throw ConfigError("env: p_t_dbm must be finite");
  }
  if (qos.size() != k) {
    throw ConfigError("env: qos needs one entry per user");
  }
  if (!qos.allFinite() || qos.minCoeff() < 0.0) {
    throw ConfigError("env: qos entries must be finite and >= 0");
  }
  if (!(gauss_markov_rho >= 0.0 && gauss_markov_rho < 1.0)) {
    throw ConfigError("env: gauss_markov_rho must lie in [0, 1)");
  }
}

EnvConfig sdma_variant(EnvConfig config) {
  config.mode = AccessMode::kSdma;
  return config;
}

Observation interleave_sinrs(const VectorXd& gamma_c, const VectorXd& gamma_p) {
  Observation obs(2 * gamma_c.size());
  for (Eigen::Index k = 0; k < gamma_c.size(); ++k) {
    obs(2 * k) = gamma_c(k);
    obs(2 * k + 1) = gamma_p(k);
  }
  return obs;
}

Eigen::Index action_dim(Eigen::Index k, AccessMode mode) {
  return mode == AccessMode::kRsma ? 2 * k + 1 : k;
}

RawAction unflatten_action(const VectorXd& flat, Eigen::Index k,
                           AccessMode mode) {
  if (flat.size() != action_dim(k, mode)) {
    throw InvalidActionError("action has " + std::to_string(flat.size()) +
                             " logits, expected " +
                             std::to_string(action_dim(k, mode)));
  }
  RawAction raw;
  if (mode == AccessMode::kRsma) {
    raw.power_logits = flat.head(k + 1);
    raw.split_logits = flat.tail(k);
  } else {
    raw.power_logits = flat;
  }
  return raw;
}

Allocation fractions_to_allocation(const VectorXd& mu, const VectorXd& split,
                                   const ComplexMatrix& channel,
                                   const Precoders& precoders,
                                   double p_t_linear) {
  const RateReport preview =
      evaluate_power_only(channel, precoders, mu, p_t_linear);
  Allocation alloc;
  alloc.mu = mu;
  alloc.c = split * preview.common_rate;
  return alloc;
}

Allocation action_to_allocation(const RawAction& raw, AccessMode mode,
                                const ComplexMatrix& channel,
                                const Precoders& precoders, double p_t_linear) {
  const Eigen::Index k = channel.cols();
  if (!raw.power_logits.allFinite() || !raw.split_logits.allFinite()) {
    throw InvalidActionError("action logits must be finite");
  }
  if (mode == AccessMode::kSdma) {
    if (raw.power_logits.size() != k) {
      throw InvalidActionError("sdma action needs K power logits");
    }
    Allocation alloc;
    alloc.mu = VectorXd::Zero(k + 1);
    alloc.mu.tail(k) = softmax(raw.power_logits);
    alloc.c = VectorXd::Zero(k);
    return alloc;
  }
  if (raw.power_logits.size() != k + 1 || raw.split_logits.size() != k) {
    throw InvalidActionError("rsma action needs K+1 power and K split logits");
  }
  return fractions_to_allocation(softmax(raw.power_logits),
                                 softmax(raw.split_logits), channel, precoders,
                                 p_t_linear);
}

double penalty(const VectorXd& total_rates, const VectorXd& qos) {
  if (total_rates.size() != qos.size() || qos.size() == 0) {
    throw std::invalid_argument("penalty: length mismatch");
  }
  int violations = 0;
  for (Eigen::Index k = 0; k < qos.size(); ++k) {
    if (total_rates(k) - qos(k) < 0.0) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(qos.size());
}

Environment::Environment(EnvConfig config, Rng rng)
    : config_((config.validate(), std::move(config))),
      p_t_linear_(config_.p_t_linear()),
      rng_(rng),
      process_(config_.m, config_.k, p_t_linear_,
               ChannelConfig{rng.seed(), config_.perfect_csit,
                             config_.gauss_markov_rho}) {}

VectorXd Environment::uniform_mu() const {
  const Eigen::Index k = config_.k;
  if (config_.mode == AccessMode::kSdma) {
    VectorXd mu = VectorXd::Constant(k + 1, 1.0 / static_cast<double>(k));
    mu(0) = 0.0;
    return mu;
  }
  return VectorXd::Constant(k + 1, 1.0 / static_cast<double>(k + 1));
}

void Environment::advance_channel() {
  channel_ = process_.advance(rng_);
  precoders_ = compute_precoders(channel_.estimated_channel);
}

Observation Environment::observe(const VectorXd& mu) const {
  const SinrPair sinr =
      compute_sinrs(channel_.true_channel, precoders_, mu, p_t_linear_);
  return interleave_sinrs(sinr.common, sinr.priv);
}

Observation Environment::reset() {
  advance_channel();
  step_count_ = 0;
  started_ = true;
  return observe(uniform_mu());
}

Observation Environment::reset(Rng rng) {
  rng_ = rng;
  process_ = ChannelProcess(config_.m, config_.k, p_t_linear_,
                            ChannelConfig{rng.seed(), config_.perfect_csit,
                                          config_.gauss_markov_rho});
  return reset();
}

void Environment::override_channel(const ChannelRealization& channel) {
  if (channel.true_channel.rows() != config_.m ||
      channel.true_channel.cols() != config_.k) {
    throw std::invalid_argument("override_channel: shape mismatch");
  }
  channel_ = channel;
  precoders_ = compute_precoders(channel_.estimated_channel);
}

StepOutcome Environment::step(const RawAction& raw) {
  if (!started_) throw UsageError("step called before reset");
  if (done()) throw EpisodeFinishedError("step called after episode end");
  return finish_step(action_to_allocation(raw, config_.mode,
                                          channel_.true_channel, precoders_,
                                          p_t_linear_));
}

StepOutcome Environment::step(const VectorXd& flat_logits) {
  return step(unflatten_action(flat_logits, config_.k, config_.mode));
}

StepOutcome Environment::step_fractions(const VectorXd& mu,
                                        const VectorXd& split) {
  if (!started_) throw UsageError("step called before reset");
  if (done()) throw EpisodeFinishedError("step called after episode end");
  if (mu.size() != config_.k + 1 || split.size() != config_.k) {
    throw InvalidActionError("step_fractions: dimension mismatch");
  }
  if (config_.mode == AccessMode::kSdma) {
    VectorXd private_only = mu;
    const double rest = mu.tail(config_.k).sum();
    private_only(0) = 0.0;
    if (rest > 0.0) private_only.tail(config_.k) /= rest;
    Allocation alloc{private_only, VectorXd::Zero(config_.k)};
    return finish_step(alloc);
  }
  return finish_step(fractions_to_allocation(mu, split, channel_.true_channel,
                                             precoders_, p_t_linear_));
}

StepOutcome Environment::finish_step(const Allocation& alloc) {
  const RateReport report =
      evaluate_rates(channel_.true_channel, precoders_, alloc, p_t_linear_);
  StepOutcome out;
  out.allocation = alloc;
  out.sum_rate = report.sum_rate;
  out.penalty = rsma::penalty(report.total_rates, config_.qos);
  out.qos_violations = static_cast<int>(
      std::lround(out.penalty * static_cast<double>(config_.k)));
  out.reward = out.sum_rate * (1.0 - out.penalty);

  ++step_count_;
  advance_channel();
  out.observation = observe(alloc.mu);
  out.done = step_count_ >= config_.episode_len;
  return out;
}

}  // namespace rsma
