#include <cmath>

#include <gtest/gtest.h>

#include "fluidmc/error.hpp"
#include "fluidmc/fluid.hpp"
#include "fluidmc/ode.hpp"
#include "fluidmc/validate.hpp"
#include "test_common.hpp"

namespace fluidmc {
namespace {

TEST(Ode, ExponentialDecayWithDenseOutput) {
  const auto sol = ode::integrate([](double, std::span<const double> y, std::span<double> d) { d[0] = -y[0]; },
                                  0.0, 5.0, {1.0});
  EXPECT_NEAR(sol.final_state()[0], std::exp(-5.0), 1e-9);
  for (double t = 0.0; t <= 5.0; t += 0.137) EXPECT_NEAR(sol(t)[0], std::exp(-t), 1e-8) << t;
  EXPECT_DOUBLE_EQ(sol.t_begin(), 0.0);
  EXPECT_DOUBLE_EQ(sol.t_end(), 5.0);
}

TEST(Ode, HarmonicOscillator) {
  ode::Options o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  const auto sol = ode::integrate(
      [](double, std::span<const double> y, std::span<double> d) {
        d[0] = y[1];
        d[1] = -y[0];
      },
      0.0, 10.0, {1.0, 0.0}, o);
  EXPECT_NEAR(sol.final_state()[0], std::cos(10.0), 1e-8);
  EXPECT_NEAR(sol(3.3)[1], -std::sin(3.3), 1e-7);
}

TEST(Ode, ControlDimKeepsStepSequence) {
  auto rhs1 = [](double t, std::span<const double> y, std::span<double> d) { d[0] = -2.0 * y[0] + std::sin(t); };
  auto rhs2 = [](double t, std::span<const double> y, std::span<double> d) {
    d[0] = -2.0 * y[0] + std::sin(t);
    d[1] = 100.0 * std::cos(50.0 * t);
  };
  ode::Options o;
  o.control_dim = 1;
  const auto a = ode::integrate(rhs1, 0.0, 3.0, {1.0});
  const auto b = ode::integrate(rhs2, 0.0, 3.0, {1.0, 0.0}, o);
  EXPECT_EQ(a.mesh(), b.mesh());
}

TEST(Ode, HookStop) {
  ode::Options o;
  o.max_step = 0.5;
  const auto sol = ode::integrate([](double, std::span<const double>, std::span<double> d) { d[0] = 1.0; }, 0.0,
                                  10.0, {0.0}, o, [](double t, std::span<double>) {
                                    return t > 2.0 ? ode::StepAction::Stop : ode::StepAction::Continue;
                                  });
  EXPECT_LT(sol.t_end(), 10.0);
  EXPECT_GT(sol.t_end(), 2.0);
}

TEST(Ode, StepSizeUnderflow) {
  ode::Options o;
  o.max_steps = 1000000;
  EXPECT_THROW(ode::integrate([](double, std::span<const double> y, std::span<double> d) { d[0] = y[0] * y[0]; },
                              0.0, 2.0, {1.0}, o),
               StepSizeUnderflow);
}

TEST(Fluid, TwoStateClosedForm) {
  const auto m = test::flip_model(2.0, 1.0);
  const auto traj = solve_fluid(m, 5.0);
  for (double t : {0.0, 0.3, 1.0, 2.5, 5.0}) {
    const double on = 1.0 / 3.0 + 2.0 / 3.0 * std::exp(-3.0 * t);
    EXPECT_NEAR(traj(t)[0], on, 1e-8) << t;
  }
}

// Property: the drift equals the density row times the agent generator.
TEST(Fluid, DriftIsDensityTimesGenerator) {
  for (const char* name : {"bike", "sir", "two_state_asym"}) {
    const auto m = test::model(name);
    const AgentGenerator gen(m);
    const Drift f(m);
    std::vector<double> out(m.n_states());
    for (const auto& x : simplex_samples(m.n_states(), 200)) {
      f(x, out);
      const Matrix q = gen(x);
      for (std::size_t j = 0; j < m.n_states(); ++j) {
        double v = 0.0;
        for (std::size_t i = 0; i < m.n_states(); ++i) v += x[i] * q(static_cast<Eigen::Index>(i),
                                                                        static_cast<Eigen::Index>(j));
        EXPECT_NEAR(v, out[j], 1e-10) << name;
      }
    }
  }
}

// Property: Q(x) is a generator everywhere on the simplex.
TEST(Fluid, GeneratorRowsSumToZero) {
  const auto m = test::model("bike");
  const AgentGenerator gen(m);
  for (const auto& x : simplex_samples(m.n_states(), 300)) {
    const Matrix q = gen(x);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      EXPECT_NEAR(q.row(i).sum(), 0.0, 1e-12);
      for (Eigen::Index j = 0; j < q.cols(); ++j)
        if (i != j) EXPECT_GE(q(i, j), 0.0);
    }
  }
}

// Property: the fluid solution stays on the simplex.
TEST(Fluid, StaysOnSimplex) {
  const auto m = test::model("bike");
  const auto traj = solve_fluid(m, 200.0);
  for (double t = 0.0; t <= 200.0; t += 0.5) {
    const auto x = traj(t);
    double s = 0.0;
    for (double v : x) {
      EXPECT_GE(v, -1e-12);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Fluid, SharesFollowDeclaredOrder) {
  const auto m = parse_model(
      "model m\nstates a, b\nparam k = 2\n"
      "transition p { rule a -> b; rate k * x_a * x_b; percap k * x_b }\n"
      "transition s { rule b -> a; rate k * x_b * x_a }\n"
      "transition g { rule a -> b; rate k * x_b }\ninit x_a = 1\n");
  const AgentGenerator gen(m);
  ASSERT_EQ(gen.entries().size(), 3u);
  EXPECT_FALSE(gen.entries()[0].guarded);
  EXPECT_FALSE(gen.entries()[1].guarded);
  EXPECT_TRUE(gen.entries()[2].guarded);
}

TEST(Fluid, SteadyStateTwoState) {
  const auto ss = steady_state(test::flip_model(2.0, 1.0));
  EXPECT_NEAR(ss.x_star[0], 1.0 / 3.0, 1e-9);
  EXPECT_LT(ss.residual, 1e-9);
}

TEST(Fluid, ProjectSimplex) {
  std::vector<double> x{0.5, 0.6, -1e-3};
  EXPECT_TRUE(project_simplex(x));
  EXPECT_NEAR(x[0] + x[1] + x[2], 1.0, 1e-15);
  EXPECT_EQ(x[2], 0.0);
  std::vector<double> ok{0.25, 0.75};
  EXPECT_FALSE(project_simplex(ok));
}

TEST(Fluid, AbsorbingModificationZeroesRows) {
  const auto m = test::model("bike");
  const auto gen = AgentGenerator(m).with_absorbing({false, false, false, false, true});
  const Matrix q = gen(m.init_density);
  EXPECT_EQ(q.row(4).cwiseAbs().sum(), 0.0);
}

}  // namespace
}  // namespace fluidmc
