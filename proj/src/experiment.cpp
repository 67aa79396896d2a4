#include "rsma/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rsma/errors.hpp"

namespace rsma {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key " + key + ": expected a number, got '" + value + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key " + key + ": expected an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key " + key + ": expected an unsigned integer, got '" +
                      value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key " + key + ": expected true or false, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("config key " + key + ": empty list");
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& format) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += format(items[i]);
  }
  return out;
}

std::string csit_label(bool perfect) { return perfect ? "perfect" : "imperfect"; }

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kPpo:
      return "ppo";
    case Algorithm::kQLearning:
      return "qlearning";
    case Algorithm::kGreedy:
      return "greedy";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "ppo") return Algorithm::kPpo;
  if (text == "qlearning" || text == "q-learning") return Algorithm::kQLearning;
  if (text == "greedy") return Algorithm::kGreedy;
  throw ConfigError("unknown algorithm '" + std::string(text) +
                    "' (expected ppo, qlearning or greedy)");
}

void RunConfig::finalize() {
  if (env.qos.size() == 1 && env.k != 1) {
    env.qos = VectorXd::Constant(env.k, env.qos(0));
  }
  env.validate();
  ppo.validate();
  if (episodes < 1) throw ConfigError("run: episodes must be >= 1");
  if (eval_episodes < 1) throw ConfigError("run: eval_episodes must be >= 1");
  if (seeds.empty()) throw ConfigError("run: seeds must not be empty");
  if (qlearning.actions < 1 || greedy.actions < 1) {
    throw ConfigError("baselines: action counts must be >= 1");
  }
  if (qlearning.warmup_steps < 1) {
    throw ConfigError("qlearning: warmup_steps must be >= 1");
  }
  if (2 * env.k > 20 && algorithm == Algorithm::kQLearning) {
    throw ConfigError("qlearning: state table too large for K=" + std::to_string(env.k));
  }
}

RunConfig apply_desk_profile(RunConfig config) {
  const double q_m = config.env.qos.size() > 0 ? config.env.qos(0) : 0.1;
  config.env.k = 2;
  config.env.m = 2;
  config.env.qos = VectorXd::Constant(2, q_m);
  config.env.episode_len = 100;
  config.episodes = 300;
  // 30k steps leave only 15 updates: bigger steps and one-step TD
  // advantages, since block-fading makes multi-step returns mostly noise.
  config.ppo.learning_rate = 3e-3;
  config.ppo.gae_lambda = 0.0;
  return config;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": missing '='");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_key_values(RunConfig& c, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "channel.seed") {
      c.seed = parse_u64(key, value);
    } else if (key == "channel.perfect_csit" || key == "env.perfect_csit") {
      c.env.perfect_csit = parse_bool(key, value);
    } else if (key == "channel.gauss_markov_rho") {
      c.env.gauss_markov_rho = parse_double(key, value);
    } else if (key == "env.m") {
      c.env.m = parse_int(key, value);
    } else if (key == "env.k") {
      c.env.k = parse_int(key, value);
    } else if (key == "env.p_t_dbm") {
      c.env.p_t_dbm = parse_double(key, value);
    } else if (key == "env.qos") {
      const auto list = parse_double_list(key, value);
      c.env.qos = Eigen::Map<const VectorXd>(list.data(), static_cast<Eigen::Index>(list.size()));
    } else if (key == "env.episode_len") {
      c.env.episode_len = static_cast<int>(parse_int(key, value));
    } else if (key == "env.mode") {
      c.env.mode = parse_access_mode(value);
    } else if (key == "run.algorithm") {
      c.algorithm = parse_algorithm(value);
    } else if (key == "run.episodes") {
      c.episodes = static_cast<int>(parse_int(key, value));
    } else if (key == "run.eval_episodes") {
      c.eval_episodes = static_cast<int>(parse_int(key, value));
    } else if (key == "run.seeds") {
      c.seeds.clear();
      for (const auto& item : split_list(value)) c.seeds.push_back(parse_u64(key, item));
    } else if (key == "run.output_dir") {
      c.output_dir = value;
    } else if (key == "run.record_wall_clock") {
      c.record_wall_clock = parse_bool(key, value);
    } else if (key == "ppo.discount") {
      c.ppo.discount = parse_double(key, value);
    } else if (key == "ppo.gae_lambda") {
      c.ppo.gae_lambda = parse_double(key, value);
    } else if (key == "ppo.clip") {
      c.ppo.clip = parse_double(key, value);
    } else if (key == "ppo.epochs") {
      c.ppo.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "ppo.minibatch") {
      c.ppo.minibatch = static_cast<int>(parse_int(key, value));
    } else if (key == "ppo.rollout_steps") {
      c.ppo.rollout_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "ppo.value_coef") {
      c.ppo.value_coef = parse_double(key, value);
    } else if (key == "ppo.entropy_coef") {
      c.ppo.entropy_coef = parse_double(key, value);
    } else if (key == "ppo.learning_rate") {
      c.ppo.learning_rate = parse_double(key, value);
    } else if (key == "ppo.max_grad_norm") {
      c.ppo.max_grad_norm = parse_double(key, value);
    } else if (key == "ppo.shared_trunk") {
      c.ppo.shared_trunk = parse_bool(key, value);
    } else if (key == "ppo.hidden") {
      c.ppo.hidden.clear();
      for (const auto& item : split_list(value)) c.ppo.hidden.push_back(parse_int(key, item));
    } else if (key == "ppo.init_log_std") {
      c.ppo.init_log_std = parse_double(key, value);
    } else if (key == "qlearning.actions") {
      c.qlearning.actions = static_cast<int>(parse_int(key, value));
    } else if (key == "qlearning.alpha") {
      c.qlearning.alpha = parse_double(key, value);
    } else if (key == "qlearning.epsilon_start") {
      c.qlearning.epsilon_start = parse_double(key, value);
    } else if (key == "qlearning.epsilon_end") {
      c.qlearning.epsilon_end = parse_double(key, value);
    } else if (key == "qlearning.anneal_fraction") {
      c.qlearning.anneal_fraction = parse_double(key, value);
    } else if (key == "qlearning.warmup_steps") {
      c.qlearning.warmup_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "greedy.actions") {
      c.greedy.actions = static_cast<int>(parse_int(key, value));
    } else if (key == "greedy.explore") {
      c.greedy.explore = parse_double(key, value);
    } else if (key == "sweep.power_dbm") {
      c.sweep_power_dbm = parse_double_list(key, value);
    } else if (key == "sweep.qos") {
      c.sweep_qos = parse_double_list(key, value);
    } else if (key == "sweep.algorithms") {
      c.sweep_algorithms.clear();
      for (const auto& item : split_list(value)) c.sweep_algorithms.push_back(parse_algorithm(item));
    } else if (key == "sweep.modes") {
      c.sweep_modes.clear();
      for (const auto& item : split_list(value)) c.sweep_modes.push_back(parse_access_mode(item));
    } else if (key == "sweep.csit") {
      c.sweep_perfect_csit.clear();
      for (const auto& item : split_list(value)) {
        if (item == "perfect") {
          c.sweep_perfect_csit.push_back(true);
        } else if (item == "imperfect") {
          c.sweep_perfect_csit.push_back(false);
        } else {
          throw ConfigError("sweep.csit: expected perfect or imperfect, got '" + item + "'");
        }
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_key_values(base, parse_key_values(ss.str()));
  return base;
}

std::string to_config_text(const RunConfig& c) {
  std::ostringstream out;
  const auto d = [](double v) { return format_double(v); };
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::vector<double> qos(c.env.qos.data(), c.env.qos.data() + c.env.qos.size());
  out << "channel.seed=" << c.seed << '\n'
      << "channel.perfect_csit=" << b(c.env.perfect_csit) << '\n'
      << "channel.gauss_markov_rho=" << d(c.env.gauss_markov_rho) << '\n'
      << "env.m=" << c.env.m << '\n'
      << "env.k=" << c.env.k << '\n'
      << "env.p_t_dbm=" << d(c.env.p_t_dbm) << '\n'
      << "env.qos=" << join(qos, d) << '\n'
      << "env.episode_len=" << c.env.episode_len << '\n'
      << "env.mode=" << to_string(c.env.mode) << '\n'
      << "run.algorithm=" << to_string(c.algorithm) << '\n'
      << "run.episodes=" << c.episodes << '\n'
      << "run.eval_episodes=" << c.eval_episodes << '\n'
      << "run.seeds=" << join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n'
      << "run.output_dir=" << c.output_dir.string() << '\n'
      << "run.record_wall_clock=" << b(c.record_wall_clock) << '\n'
      << "ppo.discount=" << d(c.ppo.discount) << '\n'
      << "ppo.gae_lambda=" << d(c.ppo.gae_lambda) << '\n'
      << "ppo.clip=" << d(c.ppo.clip) << '\n'
      << "ppo.epochs=" << c.ppo.epochs << '\n'
      << "ppo.minibatch=" << c.ppo.minibatch << '\n'
      << "ppo.rollout_steps=" << c.ppo.rollout_steps << '\n'
      << "ppo.value_coef=" << d(c.ppo.value_coef) << '\n'
      << "ppo.entropy_coef=" << d(c.ppo.entropy_coef) << '\n'
      << "ppo.learning_rate=" << d(c.ppo.learning_rate) << '\n'
      << "ppo.max_grad_norm=" << d(c.ppo.max_grad_norm) << '\n'
      << "ppo.shared_trunk=" << b(c.ppo.shared_trunk) << '\n'
      << "ppo.hidden=" << join(c.ppo.hidden, [](Eigen::Index h) { return std::to_string(h); }) << '\n'
      << "ppo.init_log_std=" << d(c.ppo.init_log_std) << '\n'
      << "qlearning.actions=" << c.qlearning.actions << '\n'
      << "qlearning.alpha=" << d(c.qlearning.alpha) << '\n'
      << "qlearning.epsilon_start=" << d(c.qlearning.epsilon_start) << '\n'
      << "qlearning.epsilon_end=" << d(c.qlearning.epsilon_end) << '\n'
      << "qlearning.anneal_fraction=" << d(c.qlearning.anneal_fraction) << '\n'
      << "qlearning.warmup_steps=" << c.qlearning.warmup_steps << '\n'
      << "greedy.actions=" << c.greedy.actions << '\n'
      << "greedy.explore=" << d(c.greedy.explore) << '\n'
      << "sweep.power_dbm=" << join(c.sweep_power_dbm, d) << '\n'
      << "sweep.qos=" << join(c.sweep_qos, d) << '\n'
      << "sweep.algorithms=" << join(c.sweep_algorithms, [](Algorithm a) { return to_string(a); }) << '\n'
      << "sweep.modes=" << join(c.sweep_modes, [](AccessMode m) { return to_string(m); }) << '\n'
      << "sweep.csit=" << join(c.sweep_perfect_csit, csit_label) << '\n';
  return out.str();
}

double RunRecord::final_mean_sum_rate() const {
  if (rows.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, rows.size() / 10);
  double total = 0.0;
  for (std::size_t i = rows.size() - tail; i < rows.size(); ++i) total += rows[i].mean_sum_rate;
  return total / static_cast<double>(tail);
}

double RunRecord::mean_reward(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > rows.size()) {
    throw std::out_of_range("RunRecord::mean_reward: window out of range");
  }
  double total = 0.0;
  for (std::size_t i = first; i < first + count; ++i) total += rows[i].mean_reward;
  return total / static_cast<double>(count);
}

void write_episode_csv(const fs::path& path, const std::vector<EpisodeRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kEpisodeCsvHeader << '\n';
  for (const auto& row : rows) {
    out << row.episode << ',' << format_double(row.mean_reward) << ','
        << format_double(row.mean_sum_rate) << ','
        << format_double(row.qos_violation_fraction) << ','
        << format_double(row.wall_clock_seconds) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<EpisodeRow> read_episode_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (trim(line) != kEpisodeCsvHeader) {
    throw std::runtime_error("unexpected episode CSV header in " + path.string());
  }
  std::vector<EpisodeRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_list(line);
    if (fields.size() != 5) throw std::runtime_error("malformed row in " + path.string());
    EpisodeRow row;
    row.episode = static_cast<int>(parse_int("episode", fields[0]));
    row.mean_reward = fields[1] == "nan" ? std::nan("") : parse_double("mean_reward", fields[1]);
    row.mean_sum_rate = fields[2] == "nan" ? std::nan("") : parse_double("mean_sum_rate", fields[2]);
    row.qos_violation_fraction =
        fields[3] == "nan" ? std::nan("") : parse_double("qos_violation_fraction", fields[3]);
    row.wall_clock_seconds = parse_double("wall_clock_seconds", fields[4]);
    rows.push_back(row);
  }
  return rows;
}

namespace {

class PpoPolicy final : public TrainedPolicy {
 public:
  explicit PpoPolicy(PpoAgent agent) : agent_(std::move(agent)) {}
  Algorithm algorithm() const override { return Algorithm::kPpo; }
  StepOutcome act(Environment& env, const Observation& obs) override {
    return env.step(agent_.act_deterministic(sinr_features(obs)));
  }
  void save(const fs::path& dir) const override {
    save_checkpoint(dir / "checkpoint.bin", agent_.net(), agent_.optimizer());
  }
  PpoAgent& agent() { return agent_; }

 private:
  PpoAgent agent_;
};

class QLearningPolicy final : public TrainedPolicy {
 public:
  explicit QLearningPolicy(QLearningAgent agent) : agent_(std::move(agent)) {}
  Algorithm algorithm() const override { return Algorithm::kQLearning; }
  StepOutcome act(Environment& env, const Observation& obs) override {
    const std::size_t s = agent_.state_index(obs);
    const std::size_t a = argmax_lowest(
        agent_.table().values.row(static_cast<Eigen::Index>(s)).transpose());
    const DiscreteAction& action = agent_.actions().table[a];
    return env.step_fractions(action.mu, action.split);
  }
  void save(const fs::path& dir) const override {
    save_qtable(dir / "qtable.bin", agent_.table(), agent_.thresholds());
  }
  QLearningAgent& agent() { return agent_; }

 private:
  QLearningAgent agent_;
};

class GreedyPolicy final : public TrainedPolicy {
 public:
  GreedyPolicy(GreedyHistory history, DiscreteActionSet actions)
      : history_(std::move(history)), actions_(std::move(actions)) {}
  Algorithm algorithm() const override { return Algorithm::kGreedy; }
  StepOutcome act(Environment& env, const Observation&) override {
    const DiscreteAction& action = actions_.table[argmax_lowest(history_.best)];
    return env.step_fractions(action.mu, action.split);
  }
  void save(const fs::path& dir) const override {
    save_greedy_history(dir / "greedy_history.csv", history_, actions_);
  }

 private:
  GreedyHistory history_;
  DiscreteActionSet actions_;
};

// Seeds for the training environment, the agent, and evaluation.
struct SeedPlan {
  Rng env;
  Rng agent;
  Rng warmup;
};

SeedPlan plan_seeds(std::uint64_t seed) {
  Rng master(seed);
  SeedPlan plan{master.split(), master.split(), master.split()};
  return plan;
}

Rng evaluation_rng(std::uint64_t seed) {
  return Rng(seed ^ 0x5DEECE66DA3B9F01ULL);
}

class EpisodeLogger {
 public:
  explicit EpisodeLogger(bool wall_clock)
      : wall_clock_(wall_clock), start_(std::chrono::steady_clock::now()) {}

  void add(const EpisodeStats& stats, RunRecord& record) const {
    EpisodeRow row;
    row.episode = static_cast<int>(record.rows.size()) + 1;
    row.mean_reward = stats.mean_reward();
    row.mean_sum_rate = stats.mean_sum_rate();
    row.qos_violation_fraction = stats.violation_fraction();
    row.wall_clock_seconds = elapsed();
    record.rows.push_back(row);
  }

  double elapsed() const {
    if (!wall_clock_) return 0.0;
    const auto dt = std::chrono::steady_clock::now() - start_;
    // Millisecond resolution.
    return std::round(std::chrono::duration<double>(dt).count() * 1000.0) / 1000.0;
  }

 private:
  bool wall_clock_;
  std::chrono::steady_clock::time_point start_;
};

std::unique_ptr<TrainedPolicy> train_ppo(const RunConfig& config, SeedPlan& seeds,
                                         RunRecord& record, const EpisodeLogger& log) {
  Environment env(config.env, seeds.env);
  RsmaPolicyEnvironment adapter(env);
  auto policy = std::make_unique<PpoPolicy>(
      PpoAgent(config.ppo, adapter.observation_dim(), adapter.action_dim(), seeds.agent));
  PpoAgent& agent = policy->agent();
  RolloutCursor cursor;
  const auto target = static_cast<std::size_t>(config.episodes);
  try {
    while (record.rows.size() < target) {
      agent.iterate(adapter, cursor);
      for (const auto& stats : cursor.finished) {
        if (record.rows.size() < target) log.add(stats, record);
      }
      cursor.finished.clear();
    }
  } catch (const TrainingDivergenceError&) {
    EpisodeRow failed;
    failed.episode = static_cast<int>(record.rows.size()) + 1;
    failed.mean_reward = failed.mean_sum_rate = failed.qos_violation_fraction = std::nan("");
    failed.wall_clock_seconds = log.elapsed();
    record.rows.push_back(failed);
    write_episode_csv(config.output_dir / "episodes.csv", record.rows);
    save_checkpoint(config.output_dir / "diverged_checkpoint.bin", agent.net(),
                    agent.optimizer());
    throw;
  }
  return policy;
}

std::unique_ptr<TrainedPolicy> train_qlearning(const RunConfig& config, SeedPlan& seeds,
                                               RunRecord& record, const EpisodeLogger& log) {
  const DiscreteActionSet grid = build_uniform_actions(config.qlearning.actions, config.env.k);
  Environment warmup_env(config.env, seeds.warmup);
  Rng warmup_rng = seeds.warmup.split();
  const VectorXd thresholds = median_thresholds(
      warmup_observations(warmup_env, grid, config.qlearning.warmup_steps, warmup_rng));

  auto policy = std::make_unique<QLearningPolicy>(
      QLearningAgent(config.qlearning, config.env.k, thresholds));
  QLearningAgent& agent = policy->agent();
  Environment env(config.env, seeds.env);
  Rng& rng = seeds.agent;
  const long total_steps = static_cast<long>(config.episodes) * config.env.episode_len;
  long global_step = 0;
  for (int episode = 0; episode < config.episodes; ++episode) {
    Observation obs = env.reset();
    EpisodeStats stats;
    while (!env.done()) {
      const std::size_t s = agent.state_index(obs);
      const double eps = agent.epsilon_at(global_step, total_steps);
      agent.table().epsilon = eps;
      const std::size_t a = epsilon_greedy_select(agent.table(), s, eps, rng);
      const DiscreteAction& action = agent.actions().table[a];
      const StepOutcome outcome = env.step_fractions(action.mu, action.split);
      q_update(agent.table(), s, a, outcome.reward, agent.state_index(outcome.observation),
               config.qlearning.alpha, config.ppo.discount);
      stats.reward_sum += outcome.reward;
      stats.sum_rate_sum += outcome.sum_rate;
      stats.penalty_sum += outcome.penalty;
      ++stats.steps;
      obs = outcome.observation;
      ++global_step;
    }
    log.add(stats, record);
  }
  return policy;
}

std::unique_ptr<TrainedPolicy> train_greedy(const RunConfig& config, SeedPlan& seeds,
                                            RunRecord& record, const EpisodeLogger& log) {
  DiscreteActionSet grid = build_uniform_actions(config.greedy.actions, config.env.k);
  GreedyHistory history(grid.size(), config.greedy.explore);
  Environment env(config.env, seeds.env);
  Rng& rng = seeds.agent;
  for (int episode = 0; episode < config.episodes; ++episode) {
    env.reset();
    EpisodeStats stats;
    while (!env.done()) {
      const std::size_t a = greedy_select(history, rng);
      const DiscreteAction& action = grid.table[a];
      const StepOutcome outcome = env.step_fractions(action.mu, action.split);
      history.record(a, outcome.reward);
      stats.reward_sum += outcome.reward;
      stats.sum_rate_sum += outcome.sum_rate;
      stats.penalty_sum += outcome.penalty;
      ++stats.steps;
    }
    log.add(stats, record);
  }
  return std::make_unique<GreedyPolicy>(std::move(history), std::move(grid));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path policy_artifact(const fs::path& dir, Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kPpo:
      return dir / "checkpoint.bin";
    case Algorithm::kQLearning:
      return dir / "qtable.bin";
    case Algorithm::kGreedy:
      return dir / "greedy_history.csv";
  }
  return dir;
}

}  // namespace

std::unique_ptr<TrainedPolicy> load_trained_policy(const RunConfig& config,
                                                   const fs::path& dir) {
  switch (config.algorithm) {
    case Algorithm::kPpo: {
      PpoAgent agent(config.ppo, 2 * config.env.k, action_dim(config.env.k, config.env.mode),
                     Rng(0));
      load_checkpoint(dir / "checkpoint.bin", agent.net(), agent.optimizer());
      if (agent.net().architecture().observation_dim != 2 * config.env.k ||
          agent.net().architecture().action_dim != action_dim(config.env.k, config.env.mode)) {
        throw ConfigError("checkpoint dimensions do not match the configuration");
      }
      return std::make_unique<PpoPolicy>(std::move(agent));
    }
    case Algorithm::kQLearning: {
      QTable table;
      VectorXd thresholds;
      load_qtable(dir / "qtable.bin", table, thresholds);
      QLearningAgent agent(config.qlearning, config.env.k, thresholds);
      if (table.values.rows() != agent.table().values.rows() ||
          table.values.cols() != agent.table().values.cols()) {
        throw ConfigError("Q-table dimensions do not match the configuration");
      }
      agent.table() = table;
      return std::make_unique<QLearningPolicy>(std::move(agent));
    }
    case Algorithm::kGreedy: {
      DiscreteActionSet grid = build_uniform_actions(config.greedy.actions, config.env.k);
      GreedyHistory history =
          load_greedy_history(dir / "greedy_history.csv", config.greedy.explore);
      if (history.size() != grid.size()) {
        throw ConfigError("greedy history size does not match the configuration");
      }
      return std::make_unique<GreedyPolicy>(std::move(history), std::move(grid));
    }
  }
  throw ConfigError("unknown algorithm");
}

TrainingResult run_training(const RunConfig& input) {
  RunConfig config = input;
  config.finalize();
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec || !fs::is_directory(config.output_dir)) {
    throw std::runtime_error("cannot create output directory " + config.output_dir.string());
  }
  write_text(config.output_dir / "config.txt", to_config_text(config));

  SeedPlan seeds = plan_seeds(config.seed);
  EpisodeLogger log(config.record_wall_clock);
  TrainingResult result;
  switch (config.algorithm) {
    case Algorithm::kPpo:
      result.policy = train_ppo(config, seeds, result.record, log);
      break;
    case Algorithm::kQLearning:
      result.policy = train_qlearning(config, seeds, result.record, log);
      break;
    case Algorithm::kGreedy:
      result.policy = train_greedy(config, seeds, result.record, log);
      break;
  }
  write_episode_csv(config.output_dir / "episodes.csv", result.record.rows);
  result.policy->save(config.output_dir);
  write_text(config.output_dir / "summary.txt",
             "final_mean_sum_rate=" + format_double(result.record.final_mean_sum_rate()) + "\n");
  return result;
}

EvalSummary evaluate_policy(const RunConfig& input, TrainedPolicy& policy, int episodes) {
  RunConfig config = input;
  config.finalize();
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  Environment env(config.env, evaluation_rng(config.seed));
  EvalSummary summary;
  for (int episode = 0; episode < episodes; ++episode) {
    Observation obs = env.reset();
    EpisodeStats stats;
    while (!env.done()) {
      const StepOutcome outcome = policy.act(env, obs);
      stats.reward_sum += outcome.reward;
      stats.sum_rate_sum += outcome.sum_rate;
      stats.penalty_sum += outcome.penalty;
      ++stats.steps;
      obs = outcome.observation;
    }
    EpisodeRow row;
    row.episode = episode + 1;
    row.mean_reward = stats.mean_reward();
    row.mean_sum_rate = stats.mean_sum_rate();
    row.qos_violation_fraction = stats.violation_fraction();
    summary.rows.push_back(row);
  }
  for (const auto& row : summary.rows) {
    summary.mean_reward += row.mean_reward;
    summary.mean_sum_rate += row.mean_sum_rate;
    summary.qos_violation_fraction += row.qos_violation_fraction;
  }
  const double n = static_cast<double>(summary.rows.size());
  summary.mean_reward /= n;
  summary.mean_sum_rate /= n;
  summary.qos_violation_fraction /= n;
  return summary;
}

std::vector<SummaryRow> summarize(const std::vector<SweepPoint>& points) {
  struct Group {
    SummaryRow row;
    std::vector<const SweepPoint*> members;
  };
  std::vector<Group> groups;
  for (const auto& p : points) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.row.algorithm == p.algorithm && g.row.mode == p.mode && g.row.csit == p.csit &&
             g.row.x_variable == p.x_variable && g.row.x == p.x;
    });
    if (it == groups.end()) {
      Group g;
      g.row.algorithm = p.algorithm;
      g.row.mode = p.mode;
      g.row.csit = p.csit;
      g.row.x_variable = p.x_variable;
      g.row.x = p.x;
      groups.push_back(std::move(g));
      it = std::prev(groups.end());
    }
    it->members.push_back(&p);
  }
  const auto stats = [](const std::vector<double>& v, double& mean, double& err) {
    const double n = static_cast<double>(v.size());
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    if (v.size() < 2) {
      err = 0.0;
      return;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    err = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  };
  std::vector<SummaryRow> out;
  for (auto& g : groups) {
    std::vector<double> rate, reward, viol;
    for (const auto* p : g.members) {
      rate.push_back(p->mean_sum_rate);
      reward.push_back(p->mean_reward);
      viol.push_back(p->qos_violation_fraction);
    }
    g.row.n_seeds = static_cast<int>(g.members.size());
    stats(rate, g.row.mean_sum_rate, g.row.stderr_sum_rate);
    stats(reward, g.row.mean_reward, g.row.stderr_reward);
    stats(viol, g.row.mean_violation, g.row.stderr_violation);
    out.push_back(g.row);
  }
  return out;
}

std::vector<SummaryRow> emit_plot_data(const std::vector<SweepPoint>& points,
                                       const fs::path& dir) {
  if (points.empty()) throw UsageError("emit_plot_data: no sweep points");
  const std::vector<SummaryRow> rows = summarize(points);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    csv << r.algorithm << ',' << r.mode << ',' << r.csit << ',' << r.x_variable << ','
        << format_double(r.x) << ',' << r.n_seeds << ',' << format_double(r.mean_sum_rate)
        << ',' << format_double(r.stderr_sum_rate) << ',' << format_double(r.mean_reward)
        << ',' << format_double(r.stderr_reward) << ',' << format_double(r.mean_violation)
        << ',' << format_double(r.stderr_violation) << '\n';
  }
  write_text(dir / "summary.csv", csv.str());

  std::ostringstream table;
  table << std::left << std::setw(10) << "algorithm" << std::setw(6) << "mode" << std::setw(10)
        << "csit" << std::setw(10) << "variable" << std::right << std::setw(8) << "x"
        << std::setw(6) << "n" << std::setw(12) << "sum_rate" << std::setw(10) << "+/-"
        << std::setw(12) << "reward" << std::setw(10) << "+/-" << std::setw(10) << "viol"
        << '\n';
  table << std::fixed;
  for (const auto& r : rows) {
    table << std::left << std::setw(10) << r.algorithm << std::setw(6) << r.mode
          << std::setw(10) << r.csit << std::setw(10) << r.x_variable << std::right
          << std::setprecision(2) << std::setw(8) << r.x << std::setw(6) << r.n_seeds
          << std::setprecision(4) << std::setw(12) << r.mean_sum_rate << std::setw(10)
          << r.stderr_sum_rate << std::setw(12) << r.mean_reward << std::setw(10)
          << r.stderr_reward << std::setw(10) << r.mean_violation << '\n';
  }
  write_text(dir / "summary.txt", table.str());
  return rows;
}

void write_sweep_raw(const fs::path& path, const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << kSweepRawHeader << '\n';
  for (const auto& p : points) {
    out << p.algorithm << ',' << p.mode << ',' << p.csit << ',' << p.x_variable << ','
        << format_double(p.x) << ',' << p.seed << ',' << format_double(p.mean_reward) << ','
        << format_double(p.mean_sum_rate) << ',' << format_double(p.qos_violation_fraction)
        << '\n';
  }
  write_text(path, out.str());
}

std::vector<SweepPoint> read_sweep_raw(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (trim(line) != kSweepRawHeader) {
    throw std::runtime_error("unexpected sweep CSV header in " + path.string());
  }
  std::vector<SweepPoint> points;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_list(line);
    if (f.size() != 9) throw std::runtime_error("malformed sweep row in " + path.string());
    SweepPoint p;
    p.algorithm = f[0];
    p.mode = f[1];
    p.csit = f[2];
    p.x_variable = f[3];
    p.x = parse_double("x", f[4]);
    p.seed = parse_u64("seed", f[5]);
    p.mean_reward = parse_double("mean_reward", f[6]);
    p.mean_sum_rate = parse_double("mean_sum_rate", f[7]);
    p.qos_violation_fraction = parse_double("qos_violation_fraction", f[8]);
    points.push_back(p);
  }
  return points;
}

std::vector<SummaryRow> run_sweep(const RunConfig& base_input, SweepAxis axis,
                                  const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("run_sweep: empty value list");
  RunConfig base = base_input;
  base.finalize();
  const std::string variable = axis == SweepAxis::kPower ? "p_t_dbm" : "q_m";
  const fs::path root = base.output_dir / (axis == SweepAxis::kPower ? "power" : "qos");
  std::vector<SweepPoint> points;
  for (Algorithm algorithm : base.sweep_algorithms) {
    for (AccessMode mode : base.sweep_modes) {
      // The discrete baselines are defined on the rate-splitting grid only.
      if (mode == AccessMode::kSdma && algorithm != Algorithm::kPpo) continue;
      for (bool perfect : base.sweep_perfect_csit) {
        const std::string label =
            to_string(algorithm) + "-" + to_string(mode) + "-" + csit_label(perfect);
        for (double x : values) {
          for (std::uint64_t seed : base.seeds) {
            RunConfig cfg = base;
            cfg.algorithm = algorithm;
            cfg.env.mode = mode;
            cfg.env.perfect_csit = perfect;
            cfg.seed = seed;
            if (axis == SweepAxis::kPower) {
              cfg.env.p_t_dbm = x;
            } else {
              cfg.env.qos = VectorXd::Constant(cfg.env.k, x);
            }
            cfg.output_dir = root / label / ("x=" + format_double(x)) /
                             ("seed=" + std::to_string(seed));
            const std::string frozen = to_config_text(cfg);
            std::unique_ptr<TrainedPolicy> policy;
            if (read_text(cfg.output_dir / "config.txt") == frozen &&
                fs::exists(policy_artifact(cfg.output_dir, algorithm)) &&
                fs::exists(cfg.output_dir / "episodes.csv")) {
              policy = load_trained_policy(cfg, cfg.output_dir);
            } else {
              policy = run_training(cfg).policy;
            }
            const EvalSummary eval = evaluate_policy(cfg, *policy, cfg.eval_episodes);
            write_episode_csv(cfg.output_dir / "eval.csv", eval.rows);
            points.push_back({to_string(algorithm), to_string(mode), csit_label(perfect),
                              variable, x, seed, eval.mean_reward, eval.mean_sum_rate,
                              eval.qos_violation_fraction});
          }
        }
      }
    }
  }
  fs::create_directories(root);
  write_sweep_raw(root / "sweep_raw.csv", points);
  return emit_plot_data(points, root);
}

std::vector<SummaryRow> run_power_sweep(const RunConfig& base,
                                        const std::vector<double>& p_dbm_list) {
  return run_sweep(base, SweepAxis::kPower, p_dbm_list);
}

std::vector<SummaryRow> run_qos_sweep(const RunConfig& base, const std::vector<double>& q_list) {
  return run_sweep(base, SweepAxis::kQos, q_list);
}

}  // namespace rsma
