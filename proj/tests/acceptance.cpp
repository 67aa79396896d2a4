// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).
//
//   rsma_acceptance [work_dir]

#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rsma/baselines.hpp"
#include "rsma/channel.hpp"
#include "rsma/env.hpp"
#include "rsma/experiment.hpp"
#include "rsma/nn.hpp"
#include "rsma/numeric.hpp"
#include "rsma/phy.hpp"
#include "rsma/ppo.hpp"

using namespace rsma;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kOracleTol = 1e-12;
constexpr double kOracleSeconds = 1.0;
constexpr int kFuzzActions = 100000;
constexpr double kSlack = 1e-9;
constexpr double kFuzzSeconds = 5.0;
constexpr double kGradTol = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kGradSeconds = 30.0;
constexpr double kLearningGain = 0.20;
constexpr int kLearningWindow = 30;
constexpr double kLearningSeconds = 600.0;
constexpr double kOrderingSeconds = 1800.0;
constexpr int kSeedQuorum = 4;
constexpr int kMaxInversions = 1;
constexpr double kFixedPointTol = 1e-3;
// Equal shares of an exact grid value cannot always sum to 1.0 bit-exactly.
constexpr double kUnitSumTol = 0x1.0p-52;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

VectorXd random_simplex(Rng& rng, Eigen::Index n) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

// 1 -------------------------------------------------------------------------
void formula_oracle() {
  const auto start = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index k = std::array<Eigen::Index, 3>{1, 2, 4}[trial % 3];
    const ComplexMatrix h = sample_true_channel(rng, 4, k);
    const ComplexMatrix estimate = apply_estimation_error(h, 1e4, rng).estimated_channel;
    const Precoders w = compute_precoders(estimate);
    const VectorXd mu = random_simplex(rng, k + 1);
    const double p = dbm_to_linear(20.0 + 40.0 * rng.uniform());
    const SinrPair fast = compute_sinrs(h, w, mu, p);
    VectorXd gc, gp;
    oracle::sinrs(h, w.common, w.priv, mu, p, gc, gp);
    worst = std::max({worst, oracle::max_relative_error(fast.common, gc, 0.0),
                      oracle::max_relative_error(fast.priv, gp, 0.0)});

    // Rates from the oracle SINRs, summed term by term.
    Allocation alloc{mu, random_simplex(rng, k)};
    const RateReport r = evaluate_rates(h, w, alloc, p);
    double rc = INFINITY;
    for (Eigen::Index j = 0; j < k; ++j) rc = std::min(rc, std::log2(1.0 + gc(j)));
    double total = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) total += alloc.c(j) + std::log2(1.0 + gp(j));
    worst = std::max(worst, std::abs(r.common_rate - rc) / std::max(rc, 1e-300));
    worst = std::max(worst, std::abs(r.sum_rate - total) / total);
  }
  const double elapsed = seconds_since(start);
  report(1, "formula oracle", worst <= kOracleTol && elapsed < kOracleSeconds,
         fmt("100 instances K in {1,2,4}, max rel err %.2e (tol %.0e), %.3f s (limit %.0f s)",
             worst, kOracleTol, elapsed, kOracleSeconds));
}

// 2 -------------------------------------------------------------------------
void constraints_by_construction() {
  const auto start = Clock::now();
  Rng rng(77);
  int violations = 0;
  double worst_power = 0.0, worst_split = 0.0;
  for (int i = 0; i < kFuzzActions; ++i) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.index(4));
    const ComplexMatrix h = sample_true_channel(rng, 4, k);
    const Precoders w = compute_precoders(apply_estimation_error(h, 1e4, rng).estimated_channel);
    const double scale = std::pow(10.0, 3.0 * rng.uniform() - 1.0);
    RawAction raw{VectorXd(k + 1), VectorXd(k)};
    for (Eigen::Index j = 0; j <= k; ++j) raw.power_logits(j) = scale * rng.normal();
    for (Eigen::Index j = 0; j < k; ++j) raw.split_logits(j) = scale * rng.normal();
    const double p = dbm_to_linear(60.0 * rng.uniform());
    const Allocation a = action_to_allocation(raw, AccessMode::kRsma, h, w, p);
    const RateReport r = evaluate_power_only(h, w, a.mu, p);
    const double power_gap = std::abs(a.mu.sum() - 1.0);
    const double split_gap = std::abs(a.c.sum() - r.common_rate);
    worst_power = std::max(worst_power, power_gap);
    worst_split = std::max(worst_split, split_gap / std::max(1.0, r.common_rate));
    if (power_gap > kSlack || a.mu.minCoeff() < 0.0 || a.c.minCoeff() < 0.0 ||
        split_gap > kSlack * std::max(1.0, r.common_rate)) {
      ++violations;
    }
  }
  const double elapsed = seconds_since(start);
  report(2, "constraints by construction", violations == 0 && elapsed < kFuzzSeconds,
         fmt("%d actions, %d violations, max |sum mu - 1| %.1e, max split gap %.1e "
             "(slack %.0e), %.2f s (limit %.0f s)",
             kFuzzActions, violations, worst_power, worst_split, kSlack, elapsed, kFuzzSeconds));
}

// 3 -------------------------------------------------------------------------
void reward_edge_cases() {
  EnvConfig c;
  c.m = c.k = 4;
  c.episode_len = 10;
  Rng actions(5);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 5; ++trial) {
    const VectorXd logits = VectorXd::NullaryExpr(9, [&] { return actions.normal(); });
    c.qos = VectorXd::Zero(4);
    Environment met(c, Rng(trial));
    met.reset();
    const StepOutcome all_met = met.step(logits);
    c.qos = VectorXd::Constant(4, 1e6);
    Environment none(c, Rng(trial));
    none.reset();
    const StepOutcome none_met = none.step(logits);
    ok = ok && all_met.reward == all_met.sum_rate && all_met.penalty == 0.0;
    ok = ok && none_met.reward == 0.0 && none_met.penalty == 1.0;
  }
  // Exactly two users below target.
  const VectorXd rates = Eigen::Vector4d(2.0, 0.05, 1.0, 0.0);
  const double half = penalty(rates, VectorXd::Constant(4, 0.1));
  ok = ok && half == 0.5;
  report(3, "reward edge cases", ok,
         fmt("all met: r = R_sum, none met: r = 0, 2 of 4 violated: p = %.17g (exact equality)",
             half));
}

// 4 -------------------------------------------------------------------------
void ppo_loss_table() {
  struct Row {
    double got, want;
  };
  const Row rows[] = {
      {clip_function(0.2, 1.0), 1.2},
      {clip_function(0.2, -1.0), -0.8},
      {clip_function(0.2, 0.0), 0.0},
      {ppo_objective(0.0, 0.0, 1.0, 0.2), 1.0},
      {ppo_objective(std::log(1.5), 0.0, 1.0, 0.2), 1.2},
      {ppo_objective(std::log(0.5), 0.0, -1.0, 0.2), -0.8},
  };
  int exact = 0;
  std::string values;
  for (const Row& r : rows) {
    if (r.got == r.want) ++exact;
    values += fmt(" %.17g", r.got);
  }
  report(4, "PPO loss table", exact == 6, fmt("%d/6 exact:%s", exact, values.c_str()));
}

// 5 -------------------------------------------------------------------------
void gradient_checks() {
  const auto start = Clock::now();
  Rng rng(55);

  // Network, probe loss linear in both heads.
  double net_err = 0.0;
  for (bool shared : {true, false}) {
    PolicyValueNet net({6, 5, {16, 16}, shared, -0.5}, rng);
    net.params() += 0.3 * VectorXd::NullaryExpr(net.num_params(), [&] { return rng.normal(); });
    const MatrixXd x = MatrixXd::NullaryExpr(6, 8, [&] { return rng.normal(); });
    const MatrixXd a = MatrixXd::NullaryExpr(5, 8, [&] { return rng.normal(); });
    const Eigen::RowVectorXd b = Eigen::RowVectorXd::NullaryExpr(8, [&] { return rng.normal(); });
    PolicyValueNet::Tape tape;
    net.forward(x, &tape);
    const VectorXd analytic = net.backward(tape, a, b);
    PolicyValueNet probe = net;
    const VectorXd numeric = oracle::finite_difference(
        [&](const VectorXd& theta) {
          probe.set_params(theta);
          const NetOutput out = probe.forward(x);
          return (out.mean.array() * a.array()).sum() + (out.value.array() * b.array()).sum();
        },
        net.params(), kFdStep);
    net_err = std::max(net_err, oracle::max_relative_error(analytic, numeric, 1e-6));
  }

  // Gaussian log-density with respect to mean and log-std.
  double logp_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 5;
    const VectorXd x = VectorXd::NullaryExpr(d, [&] { return rng.normal(); });
    VectorXd packed(2 * d);
    packed << VectorXd::NullaryExpr(d, [&] { return rng.normal(); }),
        VectorXd::NullaryExpr(d, [&] { return 0.5 * rng.normal(); });
    const VectorXd mean = packed.head(d), ls = packed.tail(d);
    const VectorXd inv_var = (-2.0 * ls).array().exp();
    VectorXd analytic(2 * d);
    analytic.head(d) = (x - mean).cwiseProduct(inv_var);
    analytic.tail(d) = ((x - mean).cwiseAbs2().cwiseProduct(inv_var).array() - 1.0).matrix();
    const VectorXd numeric = oracle::finite_difference(
        [&](const VectorXd& p) { return gaussian_log_prob(p.head(d), p.tail(d), x); }, packed,
        kFdStep);
    logp_err = std::max(logp_err, oracle::max_relative_error(analytic, numeric, 1e-6));
  }

  // Full clipped objective with value and entropy terms, both sides of the clip.
  double obj_err = 0.0;
  double clip_fraction = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    PolicyValueNet net({4, 5, {16, 16}, trial != 1, -0.5}, rng);
    net.params() += 0.2 * VectorXd::NullaryExpr(net.num_params(), [&] { return rng.normal(); });
    std::vector<Transition> trs;
    const double offsets[] = {0.05, -0.05, 0.7, -0.7};
    for (int i = 0; i < 32; ++i) {
      Transition tr;
      tr.observation = VectorXd::NullaryExpr(4, [&] { return rng.normal(); });
      const NetOutput out = net.forward(tr.observation);
      tr.action = sample_gaussian(out.mean.col(0), net.log_std(), rng);
      tr.log_prob_old = gaussian_log_prob(out.mean.col(0), net.log_std(), tr.action) + offsets[i % 4];
      tr.advantage = (i / 4) % 2 ? -0.5 - rng.uniform() : 0.5 + rng.uniform();
      tr.return_to_go = rng.normal();
      trs.push_back(tr);
    }
    std::vector<std::size_t> idx(trs.size());
    std::iota(idx.begin(), idx.end(), 0);
    const PpoConfig config;
    const MinibatchLoss analytic = ppo_minibatch_loss(net, trs, idx, config);
    clip_fraction = std::max(clip_fraction, analytic.clip_fraction);
    PolicyValueNet probe = net;
    const VectorXd numeric = oracle::finite_difference(
        [&](const VectorXd& theta) {
          probe.set_params(theta);
          return ppo_minibatch_loss(probe, trs, idx, config).loss;
        },
        net.params(), kFdStep);
    obj_err = std::max(obj_err, oracle::max_relative_error(analytic.grad, numeric, 1e-6));
  }
  const double elapsed = seconds_since(start);
  const bool pass = net_err <= kGradTol && logp_err <= kGradTol && obj_err <= kGradTol &&
                    clip_fraction > 0.0 && elapsed < kGradSeconds;
  report(5, "gradient checks", pass,
         fmt("max rel err network %.1e, log-prob %.1e, clipped objective %.1e (tol %.0e, "
             "clip fraction %.2f), %.2f s (limit %.0f s)",
             net_err, logp_err, obj_err, kGradTol, clip_fraction, elapsed, kGradSeconds));
}

// 6 and 7 -------------------------------------------------------------------
RunConfig desk(const fs::path& root, Algorithm algorithm, AccessMode mode, std::uint64_t seed) {
  RunConfig c = apply_desk_profile(RunConfig{});
  c.algorithm = algorithm;
  c.env.mode = mode;
  c.seed = seed;
  c.record_wall_clock = false;
  c.output_dir = root / (to_string(algorithm) + "-" + to_string(mode)) / ("seed=" + std::to_string(seed));
  return c;
}

struct SeedResult {
  double first = 0.0, last = 0.0;
  double ppo_rsma = 0.0, ppo_sdma = 0.0, qlearning = 0.0, greedy = 0.0;
};

void learning_and_ordering(const fs::path& root) {
  std::vector<SeedResult> results;
  const auto learn_start = Clock::now();
  for (std::uint64_t seed : kSeeds) {
    SeedResult r;
    const RunConfig c = desk(root, Algorithm::kPpo, AccessMode::kRsma, seed);
    TrainingResult trained = run_training(c);
    const std::size_t n = trained.record.rows.size();
    r.first = trained.record.mean_reward(0, kLearningWindow);
    r.last = trained.record.mean_reward(n - kLearningWindow, kLearningWindow);
    r.ppo_rsma = evaluate_policy(c, *trained.policy, c.eval_episodes).mean_sum_rate;
    results.push_back(r);
  }
  const double learn_elapsed = seconds_since(learn_start);
  int improved = 0;
  std::string gains;
  for (const auto& r : results) {
    const double gain = r.last / r.first - 1.0;
    if (gain >= kLearningGain) ++improved;
    gains += fmt(" %+.0f%%", 100.0 * gain);
  }
  report(6, "learning sanity (desk PPO)",
         improved >= kSeedQuorum && learn_elapsed < kLearningSeconds,
         fmt("last-%d vs first-%d mean reward gain:%s; %d/5 seeds >= %.0f%% (need %d), "
             "%.0f s (limit %.0f s)",
             kLearningWindow, kLearningWindow, gains.c_str(), improved, 100 * kLearningGain,
             kSeedQuorum, learn_elapsed, kLearningSeconds));

  const auto order_start = Clock::now();
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const std::uint64_t seed = kSeeds[i];
    const auto eval = [&](Algorithm a, AccessMode m) {
      const RunConfig c = desk(root, a, m, seed);
      TrainingResult trained = run_training(c);
      return evaluate_policy(c, *trained.policy, c.eval_episodes).mean_sum_rate;
    };
    results[i].ppo_sdma = eval(Algorithm::kPpo, AccessMode::kSdma);
    results[i].qlearning = eval(Algorithm::kQLearning, AccessMode::kRsma);
    results[i].greedy = eval(Algorithm::kGreedy, AccessMode::kRsma);
  }
  // PPO-RSMA training time counts toward the ordering budget too.
  const double order_elapsed = seconds_since(order_start) + learn_elapsed;
  int beats_q = 0, q_vs_greedy = 0, beats_sdma = 0;
  std::string table;
  for (const auto& r : results) {
    if (r.ppo_rsma > r.qlearning) ++beats_q;
    if (r.qlearning >= r.greedy) ++q_vs_greedy;
    if (r.ppo_rsma > r.ppo_sdma) ++beats_sdma;
    table += fmt(" [%.2f %.2f %.2f %.2f]", r.ppo_rsma, r.qlearning, r.greedy, r.ppo_sdma);
  }
  report(7, "ordering (desk, matched budgets)",
         beats_q >= kSeedQuorum && q_vs_greedy >= kSeedQuorum && beats_sdma >= kSeedQuorum &&
             order_elapsed < kOrderingSeconds,
         fmt("eval sum-rate [ppo-rsma qlearning greedy ppo-sdma]:%s; ppo>q %d/5, q>=greedy "
             "%d/5, rsma>sdma %d/5 (need %d), %.0f s (limit %.0f s)",
             table.c_str(), beats_q, q_vs_greedy, beats_sdma, kSeedQuorum, order_elapsed,
             kOrderingSeconds));
}

// 8 -------------------------------------------------------------------------
int count_inversions(const std::vector<double>& curve, bool increasing) {
  int inversions = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double step = curve[i] - curve[i - 1];
    if (increasing ? step < 0.0 : step > 0.0) ++inversions;
  }
  return inversions;
}

void trends(const fs::path& root) {
  RunConfig base = apply_desk_profile(RunConfig{});
  base.sweep_algorithms = {Algorithm::kPpo};
  base.seeds = kSeeds;
  base.record_wall_clock = false;
  base.output_dir = root / "sweeps";

  const auto power_rows = run_power_sweep(base, base.sweep_power_dbm);
  std::vector<double> power_curve;
  std::string power_text;
  for (const auto& r : power_rows) {
    power_curve.push_back(r.mean_sum_rate);
    power_text += fmt(" %g:%.2f", r.x, r.mean_sum_rate);
  }
  const auto qos_rows = run_qos_sweep(base, base.sweep_qos);
  std::vector<double> qos_curve;
  std::string qos_text;
  for (const auto& r : qos_rows) {
    qos_curve.push_back(r.mean_reward);
    qos_text += fmt(" %g:%.2f", r.x, r.mean_reward);
  }
  const int power_inv = count_inversions(power_curve, true);
  const int qos_inv = count_inversions(qos_curve, false);
  report(8, "trends (desk PPO sweeps)",
         power_inv <= kMaxInversions && qos_inv <= kMaxInversions,
         fmt("sum-rate vs P_t dBm:%s (%d inversions); reward vs Q_m:%s (%d inversions); "
             "allowed %d per curve",
             power_text.c_str(), power_inv, qos_text.c_str(), qos_inv, kMaxInversions));
}

// 9 -------------------------------------------------------------------------
void baseline_mechanics() {
  const QLearningAgent agent({}, 4, VectorXd::Zero(8));
  const bool dims = agent.table().states() == 256 && agent.table().actions() == 9;

  QTable q(2, 1, 0.1);
  const double r = 1.0, discount = 0.9;
  for (int i = 0; i < 10000; ++i) q_update(q, i % 2, 0, r, (i + 1) % 2, 0.1, discount);
  const double fp_err = std::max(std::abs(q.values(0, 0) - r / (1 - discount)),
                                 std::abs(q.values(1, 0) - r / (1 - discount)));

  Rng rng(9);
  GreedyHistory h(99, 0.1);
  VectorXd previous = h.best;
  bool monotone = true;
  for (int t = 0; t < 5000; ++t) {
    const std::size_t a = greedy_select(h, rng);
    h.record(a, rng.normal() + 0.01 * static_cast<double>(a));
    monotone = monotone && (h.best.array() >= previous.array()).all();
    previous = h.best;
  }

  const DiscreteActionSet nine = build_uniform_actions(9, 4);
  const DiscreteActionSet grid = build_uniform_actions(99, 4);
  bool exact = nine.table[4].mu(0) == 0.5 && (nine.table[4].mu.tail(4).array() == 0.125).all();
  double sum_gap = 0.0;
  for (const DiscreteActionSet* set : {&nine, &grid}) {
    const int n = static_cast<int>(set->size());
    for (int i = 0; i < n; ++i) {
      const VectorXd& mu = set->table[i].mu;
      const double mu_c = (i + 1) / static_cast<double>(n + 1);
      exact = exact && mu(0) == mu_c && (mu.tail(4).array() == (1.0 - mu_c) / 4.0).all() &&
              (set->table[i].split.array() == 0.25).all();
      sum_gap = std::max(sum_gap, std::abs(mu.sum() - 1.0));
    }
  }

  report(9, "baseline mechanics",
         dims && fp_err <= kFixedPointTol && monotone && exact && sum_gap <= kUnitSumTol,
         fmt("Q-table %zux%zu (want 256x9), fixed-point err %.1e (tol %.0e), greedy best-so-far "
             "monotone %s, grid values exact %s, max |sum mu - 1| %.1e (tol 1 ulp)",
             agent.table().states(), agent.table().actions(), fp_err, kFixedPointTol,
             monotone ? "yes" : "no", exact ? "yes" : "no", sum_gap));
}

// 10 ------------------------------------------------------------------------
void determinism_and_persistence(const fs::path& root) {
  int identical = 0, roundtrips = 0, total = 0;
  for (Algorithm a : {Algorithm::kPpo, Algorithm::kQLearning, Algorithm::kGreedy}) {
    ++total;
    RunConfig c = apply_desk_profile(RunConfig{});
    c.algorithm = a;
    c.episodes = 40;
    c.eval_episodes = 10;
    c.seed = 3;
    c.record_wall_clock = false;
    c.output_dir = root / "determinism" / to_string(a) / "first";
    TrainingResult first = run_training(c);
    const EvalSummary before = evaluate_policy(c, *first.policy, c.eval_episodes);
    const fs::path first_dir = c.output_dir;
    c.output_dir = root / "determinism" / to_string(a) / "second";
    run_training(c);

    bool same = true;
    for (const auto& entry : fs::directory_iterator(first_dir)) {
      if (entry.path().filename() == "config.txt") continue;  // names its own directory
      same = same && slurp(entry.path()) == slurp(c.output_dir / entry.path().filename());
    }
    if (same) ++identical;

    const auto restored = load_trained_policy(c, first_dir);
    const EvalSummary after = evaluate_policy(c, *restored, c.eval_episodes);
    bool rows_equal = after.rows.size() == before.rows.size();
    for (std::size_t i = 0; rows_equal && i < after.rows.size(); ++i) {
      rows_equal = after.rows[i].mean_reward == before.rows[i].mean_reward &&
                   after.rows[i].mean_sum_rate == before.rows[i].mean_sum_rate;
    }
    if (rows_equal) ++roundtrips;
  }
  report(10, "determinism and persistence", identical == total && roundtrips == total,
         fmt("byte-identical reruns %d/%d, checkpoint round-trip exact evaluation %d/%d",
             identical, total, roundtrips, total));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root =
      argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "rsma_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::function<void()>> criteria = {
      formula_oracle,
      constraints_by_construction,
      reward_edge_cases,
      ppo_loss_table,
      gradient_checks,
      [&] { learning_and_ordering(root); },
      [&] { trends(root); },
      baseline_mechanics,
      [&] { determinism_and_persistence(root); },
  };
  for (const auto& run : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion aborted: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
