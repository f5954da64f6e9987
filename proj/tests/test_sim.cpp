#include <cmath>

#include <gtest/gtest.h>

#include "fluidmc/collective.hpp"
#include "fluidmc/error.hpp"
#include "fluidmc/sim.hpp"
#include "test_common.hpp"

namespace fluidmc {
namespace {

SimConfig config(int N, double t_max, std::size_t runs, std::uint64_t seed) {
  SimConfig c;
  c.N = N;
  c.t_max = t_max;
  c.runs = runs;
  c.seed = seed;
  c.grid = uniform_grid(t_max, t_max / 10.0);
  return c;
}

TEST(Sim, UniformGrid) {
  const auto g = uniform_grid(1.0, 0.1);
  ASSERT_EQ(g.size(), 11u);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
  const auto h = uniform_grid(1.0, 0.3);
  EXPECT_DOUBLE_EQ(h.back(), 1.0);
  EXPECT_EQ(h.size(), 5u);
}

TEST(Sim, ConfigChecks) {
  auto c = config(10, 1.0, 10, 1);
  c.grid = {0.0, 0.5, 0.5};
  EXPECT_THROW(check_config(c), InputError);
  c = config(0, 1.0, 10, 1);
  EXPECT_THROW(check_config(c), InputError);
}

TEST(Sim, ReplicationStreamsAreKeyed) {
  auto a = replication_stream(7, 3);
  auto b = replication_stream(7, 3);
  auto c = replication_stream(7, 4);
  EXPECT_EQ(a(), b());
  EXPECT_NE(replication_stream(7, 3)(), c());
  auto r = replication_stream(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(r);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Sim, PathConservesAgents) {
  const auto m = test::model("bike");
  auto cfg = config(50, 100.0, 1, 3);
  cfg.tag_initial_state = "a";
  const auto p = simulate_path(m, cfg, 0);
  for (const auto& c : p.counts) {
    int s = 0;
    for (int v : c) {
      EXPECT_GE(v, 0);
      s += v;
    }
    EXPECT_EQ(s, 50);
  }
  ASSERT_FALSE(p.tagged.times.empty());
  EXPECT_EQ(p.tagged.states.front(), m.state_index("a"));
  for (std::size_t k = 1; k < p.tagged.times.size(); ++k) EXPECT_GT(p.tagged.times[k], p.tagged.times[k - 1]);
}

TEST(Sim, DeterministicAcrossThreadCounts) {
  const auto m = test::model("sir");
  auto cfg = config(40, 5.0, 70, 11);
  cfg.threads = 1;
  const auto a = estimate_population(m, cfg);
  cfg.threads = 3;
  const auto b = estimate_population(m, cfg);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.sd, b.sd);
  cfg.seed = 12;
  const auto c = estimate_population(m, cfg);
  EXPECT_NE(a.mean, c.mean);
}

TEST(Sim, SingleRunHasInfiniteHalfWidth) {
  const auto m = test::model("two_state");
  auto cfg = config(10, 1.0, 1, 1);
  cfg.tag_initial_state = "on";
  const auto e = estimate_state_probs(m, cfg);
  EXPECT_TRUE(e.few_runs());
  EXPECT_TRUE(std::isinf(e.half_width(1, 0)));
}

// The tagged agent of a constant-rate model is an independent two-state chain.
TEST(Sim, TaggedOccupancyMatchesClosedForm) {
  const auto m = test::model("two_state_asym");
  auto cfg = config(20, 2.0, 4000, 5);
  cfg.tag_initial_state = "on";
  const auto e = estimate_state_probs(m, cfg);
  const auto on = e.column("on");
  for (std::size_t k = 0; k < e.grid.size(); ++k) {
    const double t = e.grid[k];
    const double expected = 1.0 / 3.0 + 2.0 / 3.0 * std::exp(-3.0 * t);
    EXPECT_NEAR(e.mean(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(on)), expected,
                4.0 * std::max(e.half_width(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(on)), 1e-3));
  }
}

TEST(Sim, CumulativeRewardEstimate) {
  const auto m = test::model("two_state");
  auto cfg = config(10, 1.0, 4000, 9);
  cfg.tag_initial_state = "on";
  const auto e = estimate_reward(m, *m.reward("flips"), RewardKind::Cumulative, cfg);
  const double expected = 0.5 + (1 - std::exp(-2.0)) / 4;
  const Eigen::Index last = static_cast<Eigen::Index>(e.grid.size() - 1);
  EXPECT_NEAR(e.mean(last, 0), expected, 4.0 * e.half_width(last, 0));
}

TEST(Sim, UniformizationMatchesMatrixExponential) {
  Matrix q(2, 2);
  q << -2.0, 2.0, 1.0, -1.0;
  const std::vector<double> p0{1.0, 0.0};
  const auto p = uniformization_transient(q, p0, 0.7);
  EXPECT_NEAR(p[0], 1.0 / 3.0 + 2.0 / 3.0 * std::exp(-2.1), 1e-11);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
}

TEST(Sim, CollectiveChainAgreesWithSsa) {
  const auto m = test::model("sir");
  const int N = 20;
  const auto chain = build_collective_generator(m, N);
  std::vector<double> p0(chain.states.size(), 0.0);
  p0[chain.index.at(initial_counts(m, N).counts)] = 1.0;
  const auto p = uniformization_transient(chain.generator, p0, 1.0);
  std::vector<double> mean(m.n_states(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t i = 0; i < m.n_states(); ++i) mean[i] += p[k] * chain.states[k][i] / double(N);

  auto cfg = config(N, 1.0, 20000, 2);
  cfg.grid = {0.0, 1.0};
  const auto e = estimate_population(m, cfg);
  for (std::size_t i = 0; i < m.n_states(); ++i)
    EXPECT_NEAR(e.mean(1, static_cast<Eigen::Index>(i)), mean[i], 4.0 * e.half_width(1, static_cast<Eigen::Index>(i)));
}

}  // namespace
}  // namespace fluidmc
