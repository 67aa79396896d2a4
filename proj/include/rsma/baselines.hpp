#ifndef RSMA_BASELINES_HPP_
#define RSMA_BASELINES_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rsma/env.hpp"
#include "rsma/rng.hpp"
#include "rsma/types.hpp"

namespace rsma {

// Uniform power allocation grid. Action i (0-based) puts mu_c = (i+1)/(n+1)
// on the common stream and splits the rest evenly; the common rate is split
// evenly too.
struct DiscreteAction {
  VectorXd mu;     // length K+1
  VectorXd split;  // length K, all 1/K
};

struct DiscreteActionSet {
  std::vector<DiscreteAction> table;
  std::size_t size() const { return table.size(); }
};

DiscreteActionSet build_uniform_actions(int n, Eigen::Index k);

// Bit d set when obs(d) >= thresholds(d); index = sum bit_d 2^d.
std::size_t discretize_state(const Observation& obs, const VectorXd& thresholds);

// Per-dimension medians of `samples` (one observation per entry).
VectorXd median_thresholds(const std::vector<Observation>& samples);

// Observations under uniformly random grid actions, for threshold placement.
std::vector<Observation> warmup_observations(Environment& env,
                                             const DiscreteActionSet& actions,
                                             int steps, Rng& rng);

struct QTable {
  MatrixXd values;  // states x actions
  double alpha = 0.1;
  double epsilon = 1.0;

  QTable() = default;
  QTable(std::size_t states, std::size_t actions, double alpha_q);
  std::size_t states() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t actions() const { return static_cast<std::size_t>(values.cols()); }
};

// Q(s,a) += alpha (r + discount max_a' Q(s',a') - Q(s,a)).
void q_update(QTable& q, std::size_t s, std::size_t a, double reward,
              std::size_t s_next, double alpha, double discount);

// Lowest index among maximal entries.
std::size_t argmax_lowest(const VectorXd& row);

std::size_t epsilon_greedy_select(const QTable& q, std::size_t s,
                                  double epsilon, Rng& rng);

struct QLearningConfig {
  int actions = 9;
  double alpha = 0.1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Fraction of the training steps over which epsilon decays linearly.
  double anneal_fraction = 0.5;
  int warmup_steps = 1000;
};

class QLearningAgent {
 public:
  QLearningAgent(const QLearningConfig& config, Eigen::Index k,
                 const VectorXd& thresholds);

  const QLearningConfig& config() const { return config_; }
  const DiscreteActionSet& actions() const { return actions_; }
  const VectorXd& thresholds() const { return thresholds_; }
  QTable& table() { return table_; }
  const QTable& table() const { return table_; }

  std::size_t state_index(const Observation& obs) const {
    return discretize_state(obs, thresholds_);
  }
  // Linear decay from epsilon_start to epsilon_end over the anneal window.
  double epsilon_at(long step, long total_steps) const;

 private:
  QLearningConfig config_;
  DiscreteActionSet actions_;
  VectorXd thresholds_;
  QTable table_;
};

// Best reward seen so far per action. Unvisited actions hold -infinity.
struct GreedyHistory {
  VectorXd best;
  Eigen::VectorXi visits;
  double explore = 0.1;

  GreedyHistory() = default;
  GreedyHistory(std::size_t n, double explore_rate);
  void record(std::size_t action, double reward);
  std::size_t size() const { return static_cast<std::size_t>(best.size()); }
};

// Exploit the best-so-far action with probability 1 - explore, else pick
// uniformly at random.
std::size_t greedy_select(const GreedyHistory& history, Rng& rng);
std::size_t greedy_select(const GreedyHistory& history, double explore, Rng& rng);

struct GreedyConfig {
  int actions = 99;
  double explore = 0.1;
};

// Q-table file, little-endian: char[8] "RSMAQTB\0", u32 version (1),
// u64 states, u64 actions, u64 threshold count, f64 alpha,
// f64[thresholds], f64[states*actions] row-major values.
void save_qtable(const std::filesystem::path& path, const QTable& q,
                 const VectorXd& thresholds);
void load_qtable(const std::filesystem::path& path, QTable& q,
                 VectorXd& thresholds);

// CSV with header action,mu_c,best_reward,visits; unvisited best is "-inf".
void save_greedy_history(const std::filesystem::path& path,
                         const GreedyHistory& history,
                         const DiscreteActionSet& actions);
GreedyHistory load_greedy_history(const std::filesystem::path& path,
                                  double explore);

}  // namespace rsma

#endif  // RSMA_BASELINES_HPP_
