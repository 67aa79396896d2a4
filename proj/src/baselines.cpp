#include "rsma/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rsma/errors.hpp"
#include "rsma/nn.hpp"

namespace rsma {

namespace {
constexpr std::array<char, 8> kQTableMagic = {'R', 'S', 'M', 'A',
                                              'Q', 'T', 'B', '\0'};
constexpr std::uint32_t kQTableVersion = 1;
}  // namespace

DiscreteActionSet build_uniform_actions(int n, Eigen::Index k) {
  if (n < 1) throw std::invalid_argument("build_uniform_actions: n must be >= 1");
  if (k < 1) throw std::invalid_argument("build_uniform_actions: k must be >= 1");
  DiscreteActionSet set;
  set.table.reserve(static_cast<std::size_t>(n));
  const double users = static_cast<double>(k);
  for (int i = 1; i <= n; ++i) {
    DiscreteAction action;
    const double mu_c = static_cast<double>(i) / static_cast<double>(n + 1);
    action.mu = VectorXd::Constant(k + 1, (1.0 - mu_c) / users);
    action.mu(0) = mu_c;
    action.split = VectorXd::Constant(k, 1.0 / users);
    set.table.push_back(std::move(action));
  }
  return set;
}

std::size_t discretize_state(const Observation& obs, const VectorXd& thresholds) {
  if (obs.size() != thresholds.size()) {
    throw std::invalid_argument("discretize_state: length mismatch");
  }
  if (obs.size() >= 63) {
    throw std::invalid_argument("discretize_state: too many dimensions");
  }
  std::size_t index = 0;
  for (Eigen::Index d = 0; d < obs.size(); ++d) {
    if (obs(d) >= thresholds(d)) index |= std::size_t{1} << d;
  }
  return index;
}

VectorXd median_thresholds(const std::vector<Observation>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("median_thresholds: no samples");
  }
  const Eigen::Index dims = samples.front().size();
  VectorXd out(dims);
  std::vector<double> column(samples.size());
  for (Eigen::Index d = 0; d < dims; ++d) {
    for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i](d);
    std::sort(column.begin(), column.end());
    const std::size_t mid = column.size() / 2;
    out(d) = column.size() % 2 ? column[mid] : 0.5 * (column[mid - 1] + column[mid]);
  }
  return out;
}

std::vector<Observation> warmup_observations(Environment& env,
                                             const DiscreteActionSet& actions,
                                             int steps, Rng& rng) {
  std::vector<Observation> samples;
  samples.reserve(static_cast<std::size_t>(steps));
  Observation obs = env.reset();
  for (int t = 0; t < steps; ++t) {
    samples.push_back(obs);
    const DiscreteAction& a = actions.table[rng.index(actions.size())];
    const StepOutcome outcome = env.step_fractions(a.mu, a.split);
    obs = outcome.done ? env.reset() : outcome.observation;
  }
  return samples;
}

QTable::QTable(std::size_t states, std::size_t actions, double alpha_q)
    : values(MatrixXd::Zero(static_cast<Eigen::Index>(states),
                            static_cast<Eigen::Index>(actions))),
      alpha(alpha_q) {}

void q_update(QTable& q, std::size_t s, std::size_t a, double reward,
              std::size_t s_next, double alpha, double discount) {
  const auto si = static_cast<Eigen::Index>(s);
  const auto ai = static_cast<Eigen::Index>(a);
  const double target =
      reward + discount * q.values.row(static_cast<Eigen::Index>(s_next)).maxCoeff();
  q.values(si, ai) += alpha * (target - q.values(si, ai));
}

std::size_t argmax_lowest(const VectorXd& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    if (row(i) > row(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

std::size_t epsilon_greedy_select(const QTable& q, std::size_t s,
                                  double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) return rng.index(q.actions());
  return argmax_lowest(q.values.row(static_cast<Eigen::Index>(s)).transpose());
}

QLearningAgent::QLearningAgent(const QLearningConfig& config, Eigen::Index k,
                               const VectorXd& thresholds)
    : config_(config),
      actions_(build_uniform_actions(config.actions, k)),
      thresholds_(thresholds),
      table_(std::size_t{1} << (2 * k), static_cast<std::size_t>(config.actions),
             config.alpha) {
  if (thresholds.size() != 2 * k) {
    throw std::invalid_argument("QLearningAgent: need 2K thresholds");
  }
  table_.epsilon = config.epsilon_start;
}

double QLearningAgent::epsilon_at(long step, long total_steps) const {
  const double window =
      config_.anneal_fraction * static_cast<double>(std::max(1L, total_steps));
  const double progress = std::min(1.0, static_cast<double>(step) / window);
  return config_.epsilon_start +
         progress * (config_.epsilon_end - config_.epsilon_start);
}

GreedyHistory::GreedyHistory(std::size_t n, double explore_rate)
    : best(VectorXd::Constant(static_cast<Eigen::Index>(n),
                              -std::numeric_limits<double>::infinity())),
      visits(Eigen::VectorXi::Zero(static_cast<Eigen::Index>(n))),
      explore(explore_rate) {}

void GreedyHistory::record(std::size_t action, double reward) {
  const auto i = static_cast<Eigen::Index>(action);
  best(i) = std::max(best(i), reward);
  ++visits(i);
}

std::size_t greedy_select(const GreedyHistory& history, double explore,
                          Rng& rng) {
  if (rng.uniform() < explore) return rng.index(history.size());
  return argmax_lowest(history.best);
}

std::size_t greedy_select(const GreedyHistory& history, Rng& rng) {
  return greedy_select(history, history.explore, rng);
}

void save_qtable(const std::filesystem::path& path, const QTable& q,
                 const VectorXd& thresholds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write Q-table: " + path.string());
  out.write(kQTableMagic.data(), kQTableMagic.size());
  le::write_u32(out, kQTableVersion);
  le::write_u64(out, q.states());
  le::write_u64(out, q.actions());
  le::write_u64(out, static_cast<std::uint64_t>(thresholds.size()));
  le::write_f64(out, q.alpha);
  for (Eigen::Index i = 0; i < thresholds.size(); ++i) le::write_f64(out, thresholds(i));
  for (Eigen::Index r = 0; r < q.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < q.values.cols(); ++c) le::write_f64(out, q.values(r, c));
  }
  if (!out) throw std::runtime_error("failed writing Q-table: " + path.string());
}

void load_qtable(const std::filesystem::path& path, QTable& q,
                 VectorXd& thresholds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open Q-table: " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kQTableMagic) throw std::runtime_error("not a Q-table file");
  if (le::read_u32(in) != kQTableVersion) {
    throw std::runtime_error("unsupported Q-table version");
  }
  const auto states = le::read_u64(in);
  const auto actions = le::read_u64(in);
  const auto n_thresholds = static_cast<Eigen::Index>(le::read_u64(in));
  QTable loaded(states, actions, le::read_f64(in));
  thresholds.resize(n_thresholds);
  for (Eigen::Index i = 0; i < n_thresholds; ++i) thresholds(i) = le::read_f64(in);
  for (Eigen::Index r = 0; r < loaded.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < loaded.values.cols(); ++c) {
      loaded.values(r, c) = le::read_f64(in);
    }
  }
  q = std::move(loaded);
}

void save_greedy_history(const std::filesystem::path& path,
                         const GreedyHistory& history,
                         const DiscreteActionSet& actions) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write greedy history: " + path.string());
  out << "action,mu_c,best_reward,visits\n";
  out.precision(17);
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << i << ',' << actions.table[i].mu(0) << ',';
    if (std::isinf(history.best(ii))) {
      out << "-inf";
    } else {
      out << history.best(ii);
    }
    out << ',' << history.visits(ii) << '\n';
  }
}

GreedyHistory load_greedy_history(const std::filesystem::path& path,
                                  double explore) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open greedy history: " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<double, int>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string action, mu_c, best, visits;
    std::getline(ss, action, ',');
    std::getline(ss, mu_c, ',');
    std::getline(ss, best, ',');
    std::getline(ss, visits, ',');
    const double value = best == "-inf" ? -std::numeric_limits<double>::infinity()
                                        : std::stod(best);
    rows.emplace_back(value, std::stoi(visits));
  }
  GreedyHistory history(rows.size(), explore);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    history.best(static_cast<Eigen::Index>(i)) = rows[i].first;
    history.visits(static_cast<Eigen::Index>(i)) = rows[i].second;
  }
  return history;
}

}  // namespace rsma
