#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "rsma/baselines.hpp"

using namespace rsma;

TEST_CASE("build_uniform_actions") {
  const DiscreteActionSet nine = build_uniform_actions(9, 4);
  REQUIRE(nine.size() == 9);
  CHECK(nine.table[4].mu(0) == 0.5);
  CHECK(nine.table[4].mu.tail(4) == VectorXd::Constant(4, 0.125));
  CHECK(nine.table[4].split == VectorXd::Constant(4, 0.25));
  for (const auto& a : nine.table) CHECK(std::abs(a.mu.sum() - 1.0) <= 1e-15);

  const DiscreteActionSet grid = build_uniform_actions(99, 2);
  REQUIRE(grid.size() == 99);
  for (int i = 0; i < 99; ++i) CHECK(grid.table[i].mu(0) == (i + 1) / 100.0);
  CHECK(grid.table.front().mu(0) == 0.01);
  CHECK(grid.table.back().mu(0) == 0.99);

  CHECK_THROWS_AS(build_uniform_actions(0, 4), std::invalid_argument);
}

TEST_CASE("grid actions are feasible") {
  Rng rng(3);
  const DiscreteActionSet actions = build_uniform_actions(9, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix h = sample_true_channel(rng, 4, 4);
    const Precoders w = compute_precoders(h);
    for (const auto& a : actions.table) {
      const Allocation alloc = fractions_to_allocation(a.mu, a.split, h, w, 1e4);
      const RateReport r = evaluate_rates(h, w, alloc, 1e4);
      CHECK(check_feasibility(alloc, r, VectorXd::Zero(4)).all_ok());
    }
  }
}

TEST_CASE("discretize_state") {
  const VectorXd thresholds = VectorXd::LinSpaced(8, 1.0, 8.0);
  CHECK(discretize_state(VectorXd::Zero(8), thresholds) == 0);
  CHECK(discretize_state(VectorXd::Constant(8, 100.0), thresholds) == 255);
  VectorXd obs = VectorXd::Zero(8);
  obs(3) = 4.0;  // equal to the threshold counts as above
  CHECK(discretize_state(obs, thresholds) == 8);
  CHECK_THROWS_AS(discretize_state(VectorXd::Zero(7), thresholds), std::invalid_argument);

  SUBCASE("total onto [0, 255]") {
    Rng rng(4);
    std::vector<int> hits(256, 0);
    for (int i = 0; i < 20000; ++i) {
      VectorXd o(8);
      for (Eigen::Index d = 0; d < 8; ++d) o(d) = thresholds(d) + rng.normal();
      const std::size_t s = discretize_state(o, thresholds);
      REQUIRE(s < 256);
      ++hits[s];
    }
    CHECK(std::count(hits.begin(), hits.end(), 0) == 0);
  }
}

TEST_CASE("median_thresholds") {
  std::vector<Observation> samples = {Eigen::Vector2d(1, 10), Eigen::Vector2d(3, 30),
                                      Eigen::Vector2d(2, 20)};
  CHECK(median_thresholds(samples) == Eigen::Vector2d(2, 20));
  samples.push_back(Eigen::Vector2d(4, 40));
  CHECK(median_thresholds(samples) == Eigen::Vector2d(2.5, 25));
  CHECK_THROWS_AS(median_thresholds({}), std::invalid_argument);
}

TEST_CASE("Q-table") {
  SUBCASE("dimensions") {
    const QLearningAgent agent({}, 4, VectorXd::Zero(8));
    CHECK(agent.table().states() == 256);
    CHECK(agent.table().actions() == 9);
    CHECK(QLearningAgent({}, 2, VectorXd::Zero(4)).table().states() == 16);
    CHECK_THROWS_AS(QLearningAgent({}, 4, VectorXd::Zero(4)), std::invalid_argument);
  }
  SUBCASE("one update from zero") {
    QTable q(4, 3, 0.5);
    q_update(q, 1, 2, 1.0, 3, 0.5, 0.9);
    CHECK(q.values(1, 2) == 0.5);
  }
  SUBCASE("zero reward decays toward zero") {
    QTable q(2, 1, 0.5);
    q.values(0, 0) = 8.0;
    for (int i = 0; i < 3; ++i) q_update(q, 0, 0, 0.0, 1, 0.5, 0.9);
    CHECK(q.values(0, 0) == 1.0);
  }
  SUBCASE("two-state chain reaches r / (1 - discount)") {
    QTable q(2, 2, 0.1);
    const double r = 1.3, discount = 0.9;
    std::size_t s = 0;
    for (int i = 0; i < 10000; ++i) {
      q_update(q, s, 0, r, 1 - s, 0.1, discount);
      s = 1 - s;
    }
    CHECK(std::abs(q.values(0, 0) - r / (1 - discount)) < 1e-3);
    CHECK(std::abs(q.values(1, 0) - r / (1 - discount)) < 1e-3);
  }
  SUBCASE("epsilon schedule") {
    const QLearningAgent agent({}, 2, VectorXd::Zero(4));
    CHECK(agent.epsilon_at(0, 1000) == 1.0);
    CHECK(agent.epsilon_at(250, 1000) == doctest::Approx(0.525));
    CHECK(agent.epsilon_at(500, 1000) == doctest::Approx(0.05));
    CHECK(agent.epsilon_at(999, 1000) == doctest::Approx(0.05));
  }
}

TEST_CASE("epsilon_greedy_select") {
  Rng rng(9);
  QTable q(1, 9, 0.1);
  q.values(0, 6) = 2.0;
  for (int i = 0; i < 100; ++i) CHECK(epsilon_greedy_select(q, 0, 0.0, rng) == 6);

  SUBCASE("uniform under full exploration") {
    const int n = 10000;
    std::vector<int> counts(9, 0);
    for (int i = 0; i < n; ++i) ++counts[epsilon_greedy_select(q, 0, 1.0, rng)];
    const double p = 1.0 / 9.0;
    const double sd = std::sqrt(n * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - n * p) <= 3.0 * sd);
  }
  SUBCASE("ties go to the lowest index") {
    QTable flat(1, 9, 0.1);
    flat.values.setConstant(1.0);
    CHECK(epsilon_greedy_select(flat, 0, 0.0, rng) == 0);
    CHECK(argmax_lowest(Eigen::Vector4d(1, 3, 3, 2)) == 1);
  }
}

TEST_CASE("greedy selection") {
  Rng rng(2);
  SUBCASE("fresh history exploits index 0") {
    GreedyHistory h(99, 0.0);
    CHECK(greedy_select(h, rng) == 0);
  }
  SUBCASE("the only visited action repeats") {
    GreedyHistory h(99, 0.0);
    h.record(41, 5.0);
    for (int i = 0; i < 50; ++i) CHECK(greedy_select(h, rng) == 41);
  }
  SUBCASE("best-so-far never decreases") {
    GreedyHistory h(5, 0.5);
    VectorXd previous = h.best;
    for (int i = 0; i < 500; ++i) {
      const std::size_t a = greedy_select(h, rng);
      h.record(a, rng.normal());
      CHECK((h.best.array() >= previous.array()).all());
      previous = h.best;
    }
    CHECK(h.visits.sum() == 500);
  }
  SUBCASE("converges to the true argmax on stationary rewards") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng local(seed);
      VectorXd rewards(99);
      for (Eigen::Index i = 0; i < 99; ++i) rewards(i) = local.uniform();
      const std::size_t target = argmax_lowest(rewards);
      GreedyHistory h(99, 0.1);
      // Five times the expected n / explore coupon-collector budget.
      for (int t = 0; t < 5 * 990 * 5; ++t) {
        const std::size_t a = greedy_select(h, local);
        h.record(a, rewards(static_cast<Eigen::Index>(a)));
      }
      CHECK(greedy_select(h, 0.0, local) == target);
    }
  }
}

TEST_CASE("baseline persistence") {
  const auto dir = std::filesystem::temp_directory_path() / "rsma_test_baselines";
  std::filesystem::create_directories(dir);
  SUBCASE("Q-table") {
    QTable q(16, 9, 0.1);
    Rng rng(5);
    for (Eigen::Index i = 0; i < q.values.size(); ++i) q.values.data()[i] = rng.normal();
    const VectorXd thresholds = Eigen::Vector4d(0.1, 1.0 / 3.0, 2.5, 1e6);
    save_qtable(dir / "q.bin", q, thresholds);
    QTable loaded;
    VectorXd loaded_thresholds;
    load_qtable(dir / "q.bin", loaded, loaded_thresholds);
    CHECK(loaded.values == q.values);
    CHECK(loaded.alpha == q.alpha);
    CHECK(loaded_thresholds == thresholds);
  }
  SUBCASE("greedy history") {
    GreedyHistory h(99, 0.1);
    h.record(3, 1.0 / 3.0);
    h.record(3, 0.1);
    h.record(50, 7.25);
    save_greedy_history(dir / "g.csv", h, build_uniform_actions(99, 2));
    const GreedyHistory loaded = load_greedy_history(dir / "g.csv", 0.1);
    CHECK(loaded.best == h.best);
    CHECK(loaded.visits == h.visits);
  }
  std::filesystem::remove_all(dir);
}
