#ifndef RSMA_EXPERIMENT_HPP_
#define RSMA_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rsma/baselines.hpp"
#include "rsma/env.hpp"
#include "rsma/ppo.hpp"

namespace rsma {

enum class Algorithm { kPpo, kQLearning, kGreedy };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

struct RunConfig {
  EnvConfig env;
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::kPpo;
  PpoConfig ppo;
  QLearningConfig qlearning;
  GreedyConfig greedy;
  int episodes = 4000;
  int eval_episodes = 100;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::filesystem::path output_dir = "runs";
  // When false the wall-clock column is written as 0 so reruns are
  // byte-identical.
  bool record_wall_clock = true;

  std::vector<double> sweep_power_dbm = {20, 30, 40, 50, 60};
  std::vector<double> sweep_qos = {0.0, 0.1, 0.25, 0.5, 1.0};
  std::vector<Algorithm> sweep_algorithms = {Algorithm::kPpo, Algorithm::kQLearning,
                                             Algorithm::kGreedy};
  std::vector<AccessMode> sweep_modes = {AccessMode::kRsma};
  std::vector<bool> sweep_perfect_csit = {false};

  // Broadcasts a single QoS value to every user and checks invariants.
  void finalize();
};

// K = M = 2, 300 episodes of 100 steps, PPO step size 3e-3 and GAE lambda 0.
RunConfig apply_desk_profile(RunConfig config);

// Flat key=value text. '#' starts a comment; blank lines are ignored.
std::map<std::string, std::string> parse_key_values(const std::string& text);
// Applies recognized keys onto `config`; unknown keys raise ConfigError.
void apply_key_values(RunConfig& config,
                      const std::map<std::string, std::string>& values);
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
// Every key with its resolved value, one per line, in a fixed order.
std::string to_config_text(const RunConfig& config);

struct EpisodeRow {
  int episode = 0;
  double mean_reward = 0.0;
  double mean_sum_rate = 0.0;
  double qos_violation_fraction = 0.0;
  double wall_clock_seconds = 0.0;
};

struct RunRecord {
  std::vector<EpisodeRow> rows;

  // Average of mean_sum_rate over the last 10% of episodes (at least one).
  double final_mean_sum_rate() const;
  double mean_reward(std::size_t first, std::size_t count) const;
};

inline constexpr const char* kEpisodeCsvHeader =
    "episode,mean_reward,mean_sum_rate,qos_violation_fraction,wall_clock_seconds";

void write_episode_csv(const std::filesystem::path& path,
                       const std::vector<EpisodeRow>& rows);
std::vector<EpisodeRow> read_episode_csv(const std::filesystem::path& path);

// A trained agent acting without exploration.
class TrainedPolicy {
 public:
  virtual ~TrainedPolicy() = default;
  virtual Algorithm algorithm() const = 0;
  virtual StepOutcome act(Environment& env, const Observation& obs) = 0;
  // Writes the agent's persistent state into `dir`.
  virtual void save(const std::filesystem::path& dir) const = 0;
};

// Restores a policy previously written by TrainedPolicy::save.
std::unique_ptr<TrainedPolicy> load_trained_policy(const RunConfig& config,
                                                   const std::filesystem::path& dir);

struct TrainingResult {
  RunRecord record;
  std::unique_ptr<TrainedPolicy> policy;
};

// Trains config.algorithm for config.episodes episodes. Writes episodes.csv,
// config.txt, summary.txt and the agent state into config.output_dir.
// On divergence a nan row and the offending state are written before the
// TrainingDivergenceError propagates.
TrainingResult run_training(const RunConfig& config);

struct EvalSummary {
  double mean_reward = 0.0;
  double mean_sum_rate = 0.0;
  double qos_violation_fraction = 0.0;
  std::vector<EpisodeRow> rows;
};

// Frozen-policy evaluation on a channel stream derived from config.seed;
// identical across algorithms and CSIT modes for the same seed.
EvalSummary evaluate_policy(const RunConfig& config, TrainedPolicy& policy,
                            int episodes);

struct SweepPoint {
  std::string algorithm;
  std::string mode;
  std::string csit;
  std::string x_variable;
  double x = 0.0;
  std::uint64_t seed = 0;
  double mean_reward = 0.0;
  double mean_sum_rate = 0.0;
  double qos_violation_fraction = 0.0;
};

struct SummaryRow {
  std::string algorithm;
  std::string mode;
  std::string csit;
  std::string x_variable;
  double x = 0.0;
  int n_seeds = 0;
  double mean_sum_rate = 0.0;
  double stderr_sum_rate = 0.0;
  double mean_reward = 0.0;
  double stderr_reward = 0.0;
  double mean_violation = 0.0;
  double stderr_violation = 0.0;
};

inline constexpr const char* kSweepRawHeader =
    "algorithm,mode,csit,x_variable,x,seed,mean_reward,mean_sum_rate,"
    "qos_violation_fraction";
inline constexpr const char* kSummaryHeader =
    "algorithm,mode,csit,x_variable,x,n_seeds,mean_sum_rate,stderr_sum_rate,"
    "mean_reward,stderr_reward,mean_violation,stderr_violation";

// Groups points by (algorithm, mode, csit, x_variable, x) in order of first
// appearance; standard error is the sample deviation over sqrt(n), 0 for n=1.
std::vector<SummaryRow> summarize(const std::vector<SweepPoint>& points);

// Writes summary.csv and summary.txt into `dir`. Empty input is a UsageError.
std::vector<SummaryRow> emit_plot_data(const std::vector<SweepPoint>& points,
                                       const std::filesystem::path& dir);

void write_sweep_raw(const std::filesystem::path& path,
                     const std::vector<SweepPoint>& points);
std::vector<SweepPoint> read_sweep_raw(const std::filesystem::path& path);

enum class SweepAxis { kPower, kQos };

// Trains (or reuses a matching run directory) and evaluates every
// (algorithm, mode, csit, x, seed) combination under base.output_dir.
std::vector<SummaryRow> run_sweep(const RunConfig& base, SweepAxis axis,
                                  const std::vector<double>& values);
std::vector<SummaryRow> run_power_sweep(const RunConfig& base,
                                        const std::vector<double>& p_dbm_list);
std::vector<SummaryRow> run_qos_sweep(const RunConfig& base,
                                      const std::vector<double>& q_list);

std::string format_double(double value);

}  // namespace rsma

#endif  // RSMA_EXPERIMENT_HPP_
