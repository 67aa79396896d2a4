// Command-line front end for training, sweeps, evaluation and reporting.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "rsma/errors.hpp"
#include "rsma/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string algorithm;
  std::string mode;
  bool desk = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "key=value configuration file");
  cmd->add_option("--seed", opts.seed, "run seed (overrides channel.seed)");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--algorithm", opts.algorithm, "ppo, qlearning or greedy");
  cmd->add_option("--mode", opts.mode, "rsma or sdma");
  cmd->add_flag("--desk", opts.desk, "small K=M=2 profile, 300 x 100-step episodes");
}

rsma::RunConfig resolve(const CommonOptions& opts) {
  rsma::RunConfig config;
  // The desk profile is a base; a config file and flags override it.
  if (opts.desk) config = rsma::apply_desk_profile(config);
  if (!opts.config_path.empty()) config = rsma::load_run_config(opts.config_path, config);
  if (opts.seed) {
    config.seed = *opts.seed;
    config.seeds = {*opts.seed};
  }
  if (!opts.out.empty()) config.output_dir = opts.out;
  if (!opts.algorithm.empty()) {
    config.algorithm = rsma::parse_algorithm(opts.algorithm);
    config.sweep_algorithms = {config.algorithm};
  }
  if (!opts.mode.empty()) {
    config.env.mode = rsma::parse_access_mode(opts.mode);
    config.sweep_modes = {config.env.mode};
  }
  config.finalize();
  return config;
}

void print_summary(const std::vector<rsma::SummaryRow>& rows, const fs::path& dir) {
  std::ifstream table(dir / "summary.txt");
  std::cout << table.rdbuf();
  std::cout << rows.size() << " summary rows written to " << (dir / "summary.csv").string()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-splitting downlink power allocation lab"};
  app.require_subcommand(1);

  CommonOptions train_opts, power_opts, qos_opts, eval_opts;
  auto* train = app.add_subcommand("train", "train one algorithm and write its run directory");
  add_common(train, train_opts);
  auto* power = app.add_subcommand("sweep-power", "average sum-rate versus transmit power");
  add_common(power, power_opts);
  auto* qos = app.add_subcommand("sweep-qos", "average reward versus per-user QoS target");
  add_common(qos, qos_opts);
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a trained run directory");
  add_common(evaluate, eval_opts);
  int eval_episodes = 0;
  evaluate->add_option("--episodes", eval_episodes, "evaluation episodes (default run.eval_episodes)");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "rebuild plot data from a sweep directory");
  report->add_option("dir", report_dir, "directory containing sweep_raw.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const rsma::RunConfig config = resolve(train_opts);
      const rsma::TrainingResult result = rsma::run_training(config);
      std::cout << "trained " << rsma::to_string(config.algorithm) << " for "
                << result.record.rows.size() << " episodes; final mean sum-rate "
                << rsma::format_double(result.record.final_mean_sum_rate()) << " bps/Hz\n";
      const rsma::EvalSummary eval =
          rsma::evaluate_policy(config, *result.policy, config.eval_episodes);
      rsma::write_episode_csv(config.output_dir / "eval.csv", eval.rows);
      std::cout << "evaluation: mean sum-rate " << rsma::format_double(eval.mean_sum_rate)
                << ", mean reward " << rsma::format_double(eval.mean_reward)
                << ", QoS violation fraction "
                << rsma::format_double(eval.qos_violation_fraction) << '\n';
    } else if (*power) {
      const rsma::RunConfig config = resolve(power_opts);
      print_summary(rsma::run_power_sweep(config, config.sweep_power_dbm),
                    config.output_dir / "power");
    } else if (*qos) {
      const rsma::RunConfig config = resolve(qos_opts);
      print_summary(rsma::run_qos_sweep(config, config.sweep_qos), config.output_dir / "qos");
    } else if (*evaluate) {
      const rsma::RunConfig config = resolve(eval_opts);
      auto policy = rsma::load_trained_policy(config, config.output_dir);
      const int episodes = eval_episodes > 0 ? eval_episodes : config.eval_episodes;
      const rsma::EvalSummary eval = rsma::evaluate_policy(config, *policy, episodes);
      rsma::write_episode_csv(config.output_dir / "eval.csv", eval.rows);
      std::cout << "mean sum-rate " << rsma::format_double(eval.mean_sum_rate)
                << ", mean reward " << rsma::format_double(eval.mean_reward)
                << ", QoS violation fraction "
                << rsma::format_double(eval.qos_violation_fraction) << '\n';
    } else if (*report) {
      const fs::path dir = report_dir;
      print_summary(rsma::emit_plot_data(rsma::read_sweep_raw(dir / "sweep_raw.csv"), dir),
                    dir);
    }
  } catch (const rsma::TrainingDivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
