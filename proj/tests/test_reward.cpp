#include <cmath>

#include <gtest/gtest.h>

#include "fluidmc/error.hpp"
#include "fluidmc/reward.hpp"
#include "fluidmc/sim.hpp"
#include "test_common.hpp"

namespace fluidmc {
namespace {

TEST(Reward, ClosedFormsOnTwoState) {
  const auto m = test::flip_model(1.0, 1.0);
  EXPECT_NEAR(instantaneous_reward(m, *m.reward("occ"), 0, 1.0).value, (1 + std::exp(-2.0)) / 2, 1e-8);
  EXPECT_NEAR(cumulative_reward(m, *m.reward("flips"), 0, 1.0).value, 0.5 + (1 - std::exp(-2.0)) / 4, 1e-7);
  EXPECT_NEAR(cumulative_reward(m, *m.reward("occ"), 0, 2.0).value, 1.0 + (1 - std::exp(-4.0)) / 4, 1e-7);
  const auto ss = steady_state_reward(m, *m.reward("occ"));
  EXPECT_NEAR(ss.value, 0.5, 1e-9);
  EXPECT_TRUE(std::isnan(ss.T));
  EXPECT_EQ(ss.initial_state, kNoState);
}

TEST(Reward, ReachabilityStopsAtTarget) {
  const auto m = test::flip_model(2.0, 1.0);
  // Time spent in on before the first jump to off, capped at T.
  const std::vector<bool> target{false, true};
  const double T = 1.5;
  const double expected = (1 - std::exp(-2.0 * T)) / 2.0;
  EXPECT_NEAR(reachability_reward(m, *m.reward("occ"), target, 0, T).value, expected, 1e-8);
}

// Property: cumulative reward is linear in the reward structure.
TEST(Reward, LinearityAndAdditivity) {
  const auto m = test::model("bike");
  const auto& cost = *m.reward("cost");
  const auto& diss = *m.reward("diss");
  const double a = cumulative_reward(m, cost, 0, 200.0).value;
  const double b = cumulative_reward(m, diss, 0, 200.0).value;
  EXPECT_NEAR(cumulative_reward(m, scaled(cost, 3.7), 0, 200.0).value, 3.7 * a, 1e-7 * a);
  EXPECT_NEAR(cumulative_reward(m, combined(cost, diss), 0, 200.0).value, a + b, 1e-7 * (a + b));
}

// Property: the cumulative reward is the integral of the instantaneous one.
TEST(Reward, CumulativeIsIntegralOfInstantaneous) {
  const auto m = test::model("bike");
  const auto& cost = *m.reward("cost");
  std::vector<double> grid;
  for (int k = 0; k <= 2000; ++k) grid.push_back(0.05 * k);
  const auto inst = reward_curve(m, RewardOp::Instantaneous, cost, {}, 0, grid);
  double trap = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) trap += 0.5 * (inst[k] + inst[k - 1]) * (grid[k] - grid[k - 1]);
  EXPECT_NEAR(cumulative_reward(m, cost, 0, 100.0).value, trap, 1e-4);
}

TEST(Reward, CurveMatchesPointEvaluations) {
  const auto m = test::model("bike");
  const auto& cost = *m.reward("cost");
  const std::vector<double> grid{0.0, 10.0, 250.0, 1000.0};
  const auto curve = reward_curve(m, RewardOp::Cumulative, cost, {}, 0, grid);
  EXPECT_EQ(curve[0], 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k)
    EXPECT_NEAR(curve[k], cumulative_reward(m, cost, 0, grid[k]).value, 1e-6 * curve[k]);
  EXPECT_THROW(reward_curve(m, RewardOp::SteadyState, cost, {}, 0, grid), InputError);
}

TEST(Reward, InvalidInput) {
  const auto m = test::flip_model(1.0, 1.0);
  auto rw = *m.reward("occ");
  EXPECT_THROW(cumulative_reward(m, rw, 5, 1.0), InputError);
  EXPECT_THROW(cumulative_reward(m, rw, 0, -1.0), InputError);
  rw.state_reward[0] = -1.0;
  EXPECT_THROW(cumulative_reward(m, rw, 0, 1.0), InputError);
}

TEST(Reward, InvariantMeasure) {
  Matrix q(3, 3);
  q << -1, 1, 0, 2, -3, 1, 0, 1, -1;
  const auto pi = invariant_measure(q);
  const Eigen::Map<const Eigen::RowVectorXd> row(pi.data(), 3);
  EXPECT_LT((row * q).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(row.sum(), 1.0, 1e-12);

  Matrix two(3, 3);
  two << 0, 0, 0, 1, -2, 1, 0, 0, 0;
  try {
    invariant_measure(two);
    FAIL() << "expected NonUniqueInvariantMeasure";
  } catch (const NonUniqueInvariantMeasure& e) {
    EXPECT_EQ(e.class_measures().size(), 2u);
  }
}

TEST(Reward, SteadyStateOfBikeMatchesLongHorizon) {
  const auto m = test::model("bike");
  const auto ss = steady_state_reward(m, *m.reward("cost"));
  for (std::size_t i = 0; i < m.n_states(); ++i) EXPECT_NEAR(ss.diagnostics.invariant[i], ss.diagnostics.x_star[i], 1e-7);
  const double late = instantaneous_reward(m, *m.reward("cost"), 0, 10.0 * ss.diagnostics.t_relax).value;
  EXPECT_NEAR(late, ss.value, 1e-6);
}

TEST(Reward, CheckRewardFormula) {
  const auto m = test::flip_model(1.0, 1.0);
  const auto c = check_reward_formula(m, *parse_formula("R{flips}<=0.8 [ C<=1 ]", m), 0);
  EXPECT_EQ(c.verdict, Verdict::True);
  EXPECT_EQ(c.result.kind, RewardOp::Cumulative);
}

}  // namespace
}  // namespace fluidmc
