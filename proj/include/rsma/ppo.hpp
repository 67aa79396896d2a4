#ifndef RSMA_PPO_HPP_
#define RSMA_PPO_HPP_

#include <optional>
#include <vector>

#include "rsma/env.hpp"
#include "rsma/nn.hpp"
#include "rsma/rng.hpp"
#include "rsma/types.hpp"

namespace rsma {

struct PpoConfig {
  double discount = 0.9;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 10;
  int minibatch = 64;
  int rollout_steps = 2000;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;
  // Global gradient-norm cap per minibatch; 0 disables it.
  double max_grad_norm = 0.0;
  bool shared_trunk = true;
  std::vector<Eigen::Index> hidden = {64, 64};
  double init_log_std = -0.5;

  void validate() const;
};

// Environment seen by the agent: real-valued observations, flat logit actions.
struct EnvStep {
  VectorXd observation;
  double reward = 0.0;
  bool done = false;
  // Diagnostics carried through to episode logs.
  double sum_rate = 0.0;
  double penalty = 0.0;
};

class PolicyEnvironment {
 public:
  virtual ~PolicyEnvironment() = default;
  virtual Eigen::Index observation_dim() const = 0;
  virtual Eigen::Index action_dim() const = 0;
  virtual VectorXd reset() = 0;
  virtual EnvStep step(const VectorXd& action) = 0;
};

// log2(1 + gamma) per SINR entry; the network input.
VectorXd sinr_features(const Observation& obs);

// Adapts the downlink Environment: observations become sinr_features and
// actions are flat logit vectors.
class RsmaPolicyEnvironment final : public PolicyEnvironment {
 public:
  explicit RsmaPolicyEnvironment(Environment& env) : env_(env) {}
  Eigen::Index observation_dim() const override { return env_.observation_dim(); }
  Eigen::Index action_dim() const override { return env_.action_dim(); }
  VectorXd reset() override;
  EnvStep step(const VectorXd& action) override;

 private:
  Environment& env_;
};

struct Transition {
  VectorXd observation;
  VectorXd action;
  double log_prob_old = 0.0;
  double reward = 0.0;
  double value_estimate = 0.0;
  double return_to_go = 0.0;
  double advantage = 0.0;
  bool done = false;
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  // V(s) of the observation after the last transition when that transition
  // did not end an episode.
  std::optional<double> bootstrap_value;
  bool advantages_ready = false;

  std::size_t size() const { return transitions.size(); }
};

struct EpisodeStats {
  double reward_sum = 0.0;
  double sum_rate_sum = 0.0;
  double penalty_sum = 0.0;
  int steps = 0;

  double mean_reward() const { return steps ? reward_sum / steps : 0.0; }
  double mean_sum_rate() const { return steps ? sum_rate_sum / steps : 0.0; }
  double violation_fraction() const { return steps ? penalty_sum / steps : 0.0; }
};

// Where a rollout left off in the environment, carried across rollouts.
struct RolloutCursor {
  VectorXd observation;
  bool needs_reset = true;
  EpisodeStats running;
  std::vector<EpisodeStats> finished;
};

// Samples `steps` transitions from the Gaussian policy, restarting episodes
// as they end.
RolloutBuffer collect_rollout(PolicyEnvironment& env, const PolicyValueNet& net,
                              int steps, Rng& rng, RolloutCursor& cursor);

// GAE: delta_t = r_t + discount V(s_{t+1}) (1 - done_t) - V(s_t),
// A_t = sum_l (discount lambda)^l delta_{t+l}, return = A_t + V(s_t).
// Normalizes advantages to zero mean and unit variance when requested.
void estimate_advantages(RolloutBuffer& buffer, double discount,
                         double gae_lambda, bool normalize = true);
void normalize_advantages(RolloutBuffer& buffer);

// (1 + eps) A for A >= 0, (1 - eps) A otherwise.
double clip_function(double epsilon, double advantage);

// min(ratio A, clip_function(eps, A)) with ratio = exp(new - old); the
// log-ratio is clamped to +-20 first.
double ppo_objective(double log_prob_new, double log_prob_old,
                     double advantage, double epsilon);

// d ppo_objective / d log_prob_new.
double ppo_objective_grad(double log_prob_new, double log_prob_old,
                          double advantage, double epsilon);

inline constexpr double kLogRatioClamp = 20.0;

struct UpdateMetrics {
  double mean_ratio = 0.0;
  double first_minibatch_ratio = 0.0;
  double clip_fraction = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int optimizer_steps = 0;
};

struct MinibatchLoss {
  double loss = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  VectorXd grad;
};

// Loss and full-parameter gradient on the given transitions:
//   -mean obj + value_coef mean (V - R)^2 - entropy_coef H
MinibatchLoss ppo_minibatch_loss(const PolicyValueNet& net,
                                 const std::vector<Transition>& transitions,
                                 const std::vector<std::size_t>& indices,
                                 const PpoConfig& config);

// Multi-epoch shuffled minibatch optimization over one buffer.
UpdateMetrics ppo_update(PolicyValueNet& net, Adam& adam,
                         const RolloutBuffer& buffer, const PpoConfig& config,
                         Rng& rng);

// Network, optimizer and sampling state of one PPO learner.
class PpoAgent {
 public:
  PpoAgent(const PpoConfig& config, Eigen::Index observation_dim,
           Eigen::Index action_dim, Rng rng);

  const PpoConfig& config() const { return config_; }
  PolicyValueNet& net() { return net_; }
  const PolicyValueNet& net() const { return net_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  Rng& rng() { return rng_; }

  // One rollout plus one update. Finished episodes land in cursor.finished.
  UpdateMetrics iterate(PolicyEnvironment& env, RolloutCursor& cursor);

  // Mean action, no sampling.
  VectorXd act_deterministic(const VectorXd& observation) const;

 private:
  PpoConfig config_;
  PolicyValueNet net_;
  Adam adam_;
  Rng rng_;
};

}  // namespace rsma

#endif  // RSMA_PPO_HPP_
