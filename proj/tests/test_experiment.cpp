#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsma/errors.hpp"
#include "rsma/experiment.hpp"

using namespace rsma;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The frozen config names its own directory; drop that line to compare runs.
std::string without_output_dir(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("run.output_dir=", 0) != 0) out += line + "\n";
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rsma_test_exp_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig tiny(Algorithm algorithm, const fs::path& out) {
  RunConfig c;
  c.env.m = c.env.k = 2;
  c.env.qos = VectorXd::Constant(2, 0.1);
  c.env.episode_len = 5;
  c.algorithm = algorithm;
  c.episodes = 2;
  c.eval_episodes = 3;
  c.ppo.rollout_steps = 20;
  c.ppo.minibatch = 10;
  c.ppo.epochs = 2;
  c.ppo.hidden = {8};
  c.qlearning.warmup_steps = 50;
  c.record_wall_clock = false;
  c.output_dir = out;
  return c;
}

const Algorithm kAll[] = {Algorithm::kPpo, Algorithm::kQLearning, Algorithm::kGreedy};

}  // namespace

TEST_CASE("run_training writes one CSV row per episode") {
  for (Algorithm a : kAll) {
    CAPTURE(to_string(a));
    const fs::path dir = scratch("rows_" + to_string(a));
    const TrainingResult result = run_training(tiny(a, dir));
    CHECK(result.record.rows.size() == 2);
    const std::string csv = slurp(dir / "episodes.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.rfind(std::string(kEpisodeCsvHeader) + "\n", 0) == 0);
    CHECK(read_episode_csv(dir / "episodes.csv").size() == 2);
    CHECK(fs::exists(dir / "config.txt"));
    CHECK(fs::exists(dir / "summary.txt"));
    fs::remove_all(dir);
  }
}

TEST_CASE("reruns are byte-identical") {
  for (Algorithm a : kAll) {
    CAPTURE(to_string(a));
    RunConfig c = tiny(a, scratch("rerun_a"));
    c.episodes = 4;
    run_training(c);
    const fs::path first = c.output_dir;
    c.output_dir = scratch("rerun_b");
    run_training(c);
    for (const auto& entry : fs::directory_iterator(first)) {
      const fs::path other = c.output_dir / entry.path().filename();
      REQUIRE(fs::exists(other));
      if (entry.path().filename() == "config.txt") {
        CHECK(without_output_dir(slurp(entry.path())) == without_output_dir(slurp(other)));
      } else {
        CHECK(slurp(entry.path()) == slurp(other));
      }
    }
    fs::remove_all(first);
    fs::remove_all(c.output_dir);
  }
}

TEST_CASE("frozen config reproduces the run") {
  RunConfig c = tiny(Algorithm::kPpo, scratch("freeze"));
  c.seed = 17;
  c.env.p_t_dbm = 33.3;
  c.ppo.learning_rate = 1.0 / 3.0 * 1e-3;
  run_training(c);
  const RunConfig reloaded = load_run_config(c.output_dir / "config.txt");
  CHECK(to_config_text(reloaded) == slurp(c.output_dir / "config.txt"));
  CHECK(reloaded.ppo.learning_rate == c.ppo.learning_rate);
  CHECK(reloaded.env.p_t_dbm == c.env.p_t_dbm);
  const std::string csv = slurp(c.output_dir / "episodes.csv");
  fs::remove_all(c.output_dir);
  run_training(reloaded);
  CHECK(slurp(c.output_dir / "episodes.csv") == csv);
  fs::remove_all(c.output_dir);
}

TEST_CASE("checkpoint round trip preserves evaluation") {
  for (Algorithm a : kAll) {
    CAPTURE(to_string(a));
    RunConfig c = tiny(a, scratch("ckpt_" + to_string(a)));
    c.episodes = 6;
    TrainingResult trained = run_training(c);
    const EvalSummary before = evaluate_policy(c, *trained.policy, 4);
    const auto restored = load_trained_policy(c, c.output_dir);
    const EvalSummary after = evaluate_policy(c, *restored, 4);
    CHECK(after.mean_reward == before.mean_reward);
    CHECK(after.mean_sum_rate == before.mean_sum_rate);
    REQUIRE(after.rows.size() == before.rows.size());
    for (std::size_t i = 0; i < after.rows.size(); ++i) {
      CHECK(after.rows[i].mean_reward == before.rows[i].mean_reward);
    }
    fs::remove_all(c.output_dir);
  }
}

TEST_CASE("evaluation at QoS extremes") {
  for (Algorithm a : kAll) {
    CAPTURE(to_string(a));
    RunConfig c = tiny(a, scratch("qos_" + to_string(a)));
    c.env.qos = VectorXd::Zero(2);
    TrainingResult trained = run_training(c);
    const EvalSummary free = evaluate_policy(c, *trained.policy, 3);
    CHECK(free.mean_reward == free.mean_sum_rate);
    CHECK(free.qos_violation_fraction == 0.0);

    c.env.qos = VectorXd::Constant(2, 100.0);
    const EvalSummary impossible = evaluate_policy(c, *trained.policy, 3);
    CHECK(impossible.qos_violation_fraction == 1.0);
    CHECK(impossible.mean_reward == 0.0);
    fs::remove_all(c.output_dir);
  }
}

TEST_CASE("emit_plot_data") {
  const fs::path dir = scratch("plot");
  SUBCASE("three algorithms, five seeds, five powers") {
    std::vector<SweepPoint> points;
    for (const char* alg : {"ppo", "qlearning", "greedy"}) {
      for (double p : {20.0, 30.0, 40.0, 50.0, 60.0}) {
        for (std::uint64_t s = 1; s <= 5; ++s) {
          points.push_back({alg, "rsma", "imperfect", "p_t_dbm", p, s, p / 10.0 + s,
                            p / 10.0 + 2.0 * s, 0.1 * s});
        }
      }
    }
    const auto rows = emit_plot_data(points, dir);
    CHECK(rows.size() == 15);
    CHECK(rows[0].n_seeds == 5);
    CHECK(rows[0].mean_sum_rate == doctest::Approx(2.0 + 6.0));
    // Sample sd of 2*{1..5} is sqrt(10); over sqrt(5).
    CHECK(rows[0].stderr_sum_rate == doctest::Approx(std::sqrt(2.0)));
    const std::string csv = slurp(dir / "summary.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);
    CHECK(fs::exists(dir / "summary.txt"));
  }
  SUBCASE("single seed has zero standard error") {
    const auto rows = emit_plot_data({{"ppo", "rsma", "imperfect", "q_m", 0.1, 1, 3.0, 4.0, 0.5}}, dir);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].stderr_sum_rate == 0.0);
    CHECK(rows[0].stderr_reward == 0.0);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(emit_plot_data({}, dir), UsageError);
  }
  fs::remove_all(dir);
}

TEST_CASE("sweep summary matches recomputation from evaluation CSVs") {
  RunConfig c = tiny(Algorithm::kGreedy, scratch("sweep"));
  c.seeds = {1, 2};
  c.sweep_algorithms = {Algorithm::kGreedy, Algorithm::kQLearning};
  const auto rows = run_power_sweep(c, {20.0, 40.0});
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(row.n_seeds == 2);
    double total = 0.0;
    for (std::uint64_t s : c.seeds) {
      const fs::path run = c.output_dir / "power" /
                           (row.algorithm + "-" + row.mode + "-" + row.csit) /
                           ("x=" + format_double(row.x)) / ("seed=" + std::to_string(s));
      const auto eval = read_episode_csv(run / "eval.csv");
      REQUIRE(eval.size() == 3);
      double mean = 0.0;
      for (const auto& e : eval) mean += e.mean_sum_rate;
      total += mean / 3.0;
    }
    CHECK(row.mean_sum_rate == doctest::Approx(total / 2.0).epsilon(1e-12));
  }
  const auto raw = read_sweep_raw(c.output_dir / "power" / "sweep_raw.csv");
  CHECK(raw.size() == 8);
  // A second sweep reuses the finished runs and reports the same numbers.
  const auto again = run_power_sweep(c, {20.0, 40.0});
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].mean_sum_rate == rows[i].mean_sum_rate);
  fs::remove_all(c.output_dir);
}

TEST_CASE("configuration text") {
  SUBCASE("comments, blanks and whitespace") {
    const auto kv = parse_key_values("# header\n\n env.k = 3 \nrun.episodes=7 # trailing\n");
    CHECK(kv.at("env.k") == "3");
    CHECK(kv.at("run.episodes") == "7");
  }
  SUBCASE("keys are applied") {
    RunConfig c;
    apply_key_values(c, {{"env.k", "2"}, {"env.m", "3"}, {"env.qos", "0.25"},
                         {"run.algorithm", "greedy"}, {"ppo.hidden", "32,16"},
                         {"run.seeds", "4,9"}, {"channel.perfect_csit", "true"}});
    c.finalize();
    CHECK(c.env.k == 2);
    CHECK(c.env.qos == VectorXd::Constant(2, 0.25));
    CHECK(c.algorithm == Algorithm::kGreedy);
    CHECK(c.ppo.hidden == std::vector<Eigen::Index>{32, 16});
    CHECK(c.seeds == std::vector<std::uint64_t>{4, 9});
    CHECK(c.env.perfect_csit);
  }
  SUBCASE("bad input") {
    RunConfig c;
    CHECK_THROWS_AS(apply_key_values(c, {{"env.antennas", "4"}}), ConfigError);
    CHECK_THROWS_AS(apply_key_values(c, {{"env.k", "four"}}), ConfigError);
    CHECK_THROWS_AS(apply_key_values(c, {{"run.algorithm", "dqn"}}), ConfigError);
  }
  SUBCASE("defaults and desk profile") {
    const RunConfig full;
    CHECK(full.env.m == 4);
    CHECK(full.env.k == 4);
    CHECK(full.env.p_t_dbm == 40.0);
    CHECK(full.env.episode_len == 200);
    CHECK(full.episodes == 4000);
    CHECK(full.ppo.learning_rate == 3e-4);
    const RunConfig desk = apply_desk_profile(full);
    CHECK(desk.env.k == 2);
    CHECK(desk.env.m == 2);
    CHECK(desk.env.episode_len == 100);
    CHECK(desk.episodes == 300);
  }
  SUBCASE("numbers round trip through text") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0}) {
      CHECK(std::stod(format_double(x)) == x);
    }
  }
}
