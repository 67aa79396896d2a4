#include "rsma/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rsma/errors.hpp"

namespace rsma {

void PpoConfig::validate() const {
  if (!(discount > 0.0 && discount < 1.0)) {
    throw ConfigError("ppo: discount must lie in (0, 1)");
  }
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw ConfigError("ppo: gae_lambda must lie in [0, 1]");
  }
  if (!(clip > 0.0)) throw ConfigError("ppo: clip must be positive");
  if (epochs < 1 || minibatch < 1 || rollout_steps < 1) {
    throw ConfigError("ppo: epochs, minibatch and rollout_steps must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("ppo: learning_rate must be positive");
  }
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0) {
    throw ConfigError("ppo: coefficients must be nonnegative");
  }
}

VectorXd sinr_features(const Observation& obs) {
  return obs.unaryExpr([](double g) { return std::log2(1.0 + g); });
}

VectorXd RsmaPolicyEnvironment::reset() { return sinr_features(env_.reset()); }

EnvStep RsmaPolicyEnvironment::step(const VectorXd& action) {
  const StepOutcome outcome = env_.step(action);
  EnvStep out;
  out.observation = sinr_features(outcome.observation);
  out.reward = outcome.reward;
  out.done = outcome.done;
  out.sum_rate = outcome.sum_rate;
  out.penalty = outcome.penalty;
  return out;
}

RolloutBuffer collect_rollout(PolicyEnvironment& env, const PolicyValueNet& net,
                              int steps, Rng& rng, RolloutCursor& cursor) {
  if (steps < 1) throw std::invalid_argument("collect_rollout: steps must be >= 1");
  RolloutBuffer buffer;
  buffer.transitions.reserve(static_cast<std::size_t>(steps));
  const VectorXd log_std = net.log_std();
  for (int t = 0; t < steps; ++t) {
    if (cursor.needs_reset) {
      cursor.observation = env.reset();
      cursor.running = {};
      cursor.needs_reset = false;
    }
    const NetOutput out = net.forward(cursor.observation);
    const VectorXd mean = out.mean.col(0);
    Transition tr;
    tr.observation = cursor.observation;
    tr.action = sample_gaussian(mean, log_std, rng);
    tr.log_prob_old = gaussian_log_prob(mean, log_std, tr.action);
    tr.value_estimate = out.value(0);

    const EnvStep next = env.step(tr.action);
    tr.reward = next.reward;
    tr.done = next.done;
    buffer.transitions.push_back(std::move(tr));

    cursor.running.reward_sum += next.reward;
    cursor.running.sum_rate_sum += next.sum_rate;
    cursor.running.penalty_sum += next.penalty;
    ++cursor.running.steps;
    cursor.observation = next.observation;
    if (next.done) {
      cursor.finished.push_back(cursor.running);
      cursor.needs_reset = true;
    }
  }
  if (!buffer.transitions.back().done) {
    buffer.bootstrap_value = net.forward(cursor.observation).value(0);
  }
  return buffer;
}

void estimate_advantages(RolloutBuffer& buffer, double discount,
                         double gae_lambda, bool normalize) {
  auto& trs = buffer.transitions;
  if (trs.empty()) {
    throw UsageError("estimate_advantages: empty buffer");
  }
  if (!trs.back().done && !buffer.bootstrap_value) {
    throw UsageError("estimate_advantages: open final episode without bootstrap value");
  }
  double next_value = trs.back().done ? 0.0 : *buffer.bootstrap_value;
  double running = 0.0;
  for (std::size_t i = trs.size(); i-- > 0;) {
    Transition& tr = trs[i];
    const double live = tr.done ? 0.0 : 1.0;
    if (tr.done) running = 0.0;
    const double delta = tr.reward + discount * next_value * live - tr.value_estimate;
    running = delta + discount * gae_lambda * live * running;
    tr.advantage = running;
    tr.return_to_go = running + tr.value_estimate;
    next_value = tr.value_estimate;
  }
  if (normalize) normalize_advantages(buffer);
  buffer.advantages_ready = true;
}

void normalize_advantages(RolloutBuffer& buffer) {
  auto& trs = buffer.transitions;
  if (trs.empty()) return;
  const double n = static_cast<double>(trs.size());
  double mean = 0.0;
  for (const auto& tr : trs) mean += tr.advantage;
  mean /= n;
  double var = 0.0;
  for (const auto& tr : trs) var += (tr.advantage - mean) * (tr.advantage - mean);
  var /= n;
  const double std = std::sqrt(var);
  for (auto& tr : trs) {
    tr.advantage = std > 1e-12 ? (tr.advantage - mean) / std : tr.advantage - mean;
  }
}

double clip_function(double epsilon, double advantage) {
  return advantage >= 0.0 ? (1.0 + epsilon) * advantage
                          : (1.0 - epsilon) * advantage;
}

double ppo_objective(double log_prob_new, double log_prob_old,
                     double advantage, double epsilon) {
  const double log_ratio =
      std::clamp(log_prob_new - log_prob_old, -kLogRatioClamp, kLogRatioClamp);
  const double ratio = std::exp(log_ratio);
  return std::min(ratio * advantage, clip_function(epsilon, advantage));
}

double ppo_objective_grad(double log_prob_new, double log_prob_old,
                          double advantage, double epsilon) {
  const double raw = log_prob_new - log_prob_old;
  if (std::abs(raw) > kLogRatioClamp) return 0.0;
  const double surrogate = std::exp(raw) * advantage;
  return surrogate <= clip_function(epsilon, advantage) ? surrogate : 0.0;
}

MinibatchLoss ppo_minibatch_loss(const PolicyValueNet& net,
                                 const std::vector<Transition>& transitions,
                                 const std::vector<std::size_t>& indices,
                                 const PpoConfig& config) {
  const auto batch = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index obs_dim = net.architecture().observation_dim;
  const Eigen::Index act_dim = net.architecture().action_dim;
  MatrixXd obs(obs_dim, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    obs.col(b) = transitions[indices[static_cast<std::size_t>(b)]].observation;
  }
  PolicyValueNet::Tape tape;
  const NetOutput out = net.forward(obs, &tape);
  const VectorXd log_std = net.log_std();
  const VectorXd inv_var = (-2.0 * log_std).array().exp();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  MinibatchLoss result;
  MatrixXd d_mean(act_dim, batch);
  Eigen::RowVectorXd d_value(batch);
  VectorXd d_log_std = VectorXd::Zero(act_dim);
  int clipped = 0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Transition& tr = transitions[indices[static_cast<std::size_t>(b)]];
    const VectorXd mean = out.mean.col(b);
    const double log_prob = gaussian_log_prob(mean, log_std, tr.action);
    const double obj =
        ppo_objective(log_prob, tr.log_prob_old, tr.advantage, config.clip);
    const double g =
        ppo_objective_grad(log_prob, tr.log_prob_old, tr.advantage, config.clip);
    const double ratio = std::exp(
        std::clamp(log_prob - tr.log_prob_old, -kLogRatioClamp, kLogRatioClamp));
    result.policy_objective += obj * inv_batch;
    result.mean_ratio += ratio * inv_batch;
    if (std::abs(ratio - 1.0) > config.clip) ++clipped;

    const VectorXd diff = tr.action - mean;
    // d logp / d mean = diff / sigma^2, d logp / d log_std = z^2 - 1.
    d_mean.col(b) = -inv_batch * g * diff.cwiseProduct(inv_var);
    d_log_std += -inv_batch * g *
                 (diff.cwiseAbs2().cwiseProduct(inv_var).array() - 1.0).matrix();

    const double err = out.value(b) - tr.return_to_go;
    result.value_loss += err * err * inv_batch;
    d_value(b) = config.value_coef * 2.0 * err * inv_batch;
  }
  result.entropy = gaussian_entropy(log_std);
  d_log_std.array() -= config.entropy_coef;
  result.clip_fraction = static_cast<double>(clipped) * inv_batch;
  result.loss = -result.policy_objective + config.value_coef * result.value_loss -
                config.entropy_coef * result.entropy;
  if (!std::isfinite(result.loss)) {
    throw TrainingDivergenceError("PPO loss is not finite");
  }
  result.grad = net.backward(tape, d_mean, d_value);
  result.grad.segment(net.log_std_offset(), act_dim) += d_log_std;
  return result;
}

UpdateMetrics ppo_update(PolicyValueNet& net, Adam& adam,
                         const RolloutBuffer& buffer, const PpoConfig& config,
                         Rng& rng) {
  if (!buffer.advantages_ready) {
    throw UsageError("ppo_update: advantages have not been estimated");
  }
  const std::size_t n = buffer.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<std::size_t>(config.minibatch);

  UpdateMetrics metrics;
  double ratio_sum = 0.0;
  double clip_sum = 0.0;
  double value_sum = 0.0;
  double objective_sum = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t stop = std::min(n, start + mb);
      const std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(stop));
      MinibatchLoss loss = ppo_minibatch_loss(net, buffer.transitions, indices, config);
      if (metrics.optimizer_steps == 0) metrics.first_minibatch_ratio = loss.mean_ratio;
      if (config.max_grad_norm > 0.0) {
        const double norm = loss.grad.norm();
        if (norm > config.max_grad_norm) loss.grad *= config.max_grad_norm / norm;
      }
      adam.step(net.params(), loss.grad);
      ratio_sum += loss.mean_ratio;
      clip_sum += loss.clip_fraction;
      value_sum += loss.value_loss;
      objective_sum += loss.policy_objective;
      metrics.entropy = loss.entropy;
      ++metrics.optimizer_steps;
    }
  }
  const double steps = static_cast<double>(metrics.optimizer_steps);
  metrics.mean_ratio = ratio_sum / steps;
  metrics.clip_fraction = clip_sum / steps;
  metrics.value_loss = value_sum / steps;
  metrics.policy_objective = objective_sum / steps;
  return metrics;
}

PpoAgent::PpoAgent(const PpoConfig& config, Eigen::Index observation_dim,
                   Eigen::Index action_dim, Rng rng)
    : config_(config), rng_(rng) {
  config_.validate();
  NetArchitecture arch;
  arch.observation_dim = observation_dim;
  arch.action_dim = action_dim;
  arch.hidden = config.hidden;
  arch.shared_trunk = config.shared_trunk;
  arch.init_log_std = config.init_log_std;
  net_ = PolicyValueNet(arch, rng_);
  adam_ = Adam(AdamConfig{config.learning_rate}, net_.num_params());
}

UpdateMetrics PpoAgent::iterate(PolicyEnvironment& env, RolloutCursor& cursor) {
  RolloutBuffer buffer =
      collect_rollout(env, net_, config_.rollout_steps, rng_, cursor);
  estimate_advantages(buffer, config_.discount, config_.gae_lambda);
  return ppo_update(net_, adam_, buffer, config_, rng_);
}

VectorXd PpoAgent::act_deterministic(const VectorXd& observation) const {
  return net_.forward(observation).mean.col(0);
}

}  // namespace rsma
