#include <gtest/gtest.h>

#include "fluidmc/collective.hpp"
#include "fluidmc/error.hpp"
#include "fluidmc/expr.hpp"
#include "fluidmc/model.hpp"
#include "fluidmc/parser.hpp"
#include "fluidmc/validate.hpp"
#include "test_common.hpp"

namespace fluidmc {
namespace {

TEST(Parser, BikeModelShape) {
  const auto m = test::model("bike");
  EXPECT_EQ(m.name, "bike");
  EXPECT_EQ(m.n_states(), 5u);
  EXPECT_EQ(m.transitions.size(), 9u);
  EXPECT_EQ(m.init_density, (std::vector<double>{1, 0, 0, 0, 0}));
  ASSERT_NE(m.label("riding"), nullptr);
  EXPECT_EQ(m.label("riding")->states, (std::vector<std::size_t>{1, 3}));
  const auto* diss = m.reward("diss");
  ASSERT_NE(diss, nullptr);
  EXPECT_DOUBLE_EQ(diss->transition_reward[*m.transition_index("fail_acq2")], 10.0);
  EXPECT_DOUBLE_EQ(diss->state_reward[0], 0.0);
}

TEST(Parser, PrintRoundTrip) {
  for (const char* name : {"bike", "sir", "two_state", "two_state_asym"}) {
    const auto m = test::model(name);
    EXPECT_EQ(parse_model(print_model(m)), m) << name;
  }
}

TEST(Parser, RejectsBadInput) {
  EXPECT_THROW(parse_model("model m\nstates a, a\ninit x_a = 1\n"), DuplicateName);
  EXPECT_THROW(parse_model("model m\nstates a, b\ntransition t { rule a -> c; rate x_a }\ninit x_a = 1\n"),
               UnknownIdentifier);
  EXPECT_THROW(parse_model("model m\nstates a, b\ntransition t { rule a -> b; rate x_a \ninit x_a = 1\n"),
               ParseError);
  EXPECT_THROW(parse_model("model m\nstates a, b\ninit x_a = 0.5\n"), InputError);
}

TEST(Parser, ParseErrorCarriesPosition) {
  try {
    parse_model("model m\nstates a, b\ninit x_a = 1\ntransition t { rule a -> b; rate x_a * }\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_GT(e.column(), 1u);
  }
}

TEST(Expr, DivideByDensity) {
  const auto m = test::model("sir");
  const auto& infect = m.transitions[*m.transition_index("infect")].rate;
  const auto s = m.state_index("s");
  const auto r = m.state_index("r");
  EXPECT_TRUE(has_density_factor(infect, s, m.def_bodies));
  EXPECT_FALSE(has_density_factor(infect, r, m.def_bodies));
  const auto g = divide_by_density(infect, s, m.def_bodies);
  ASSERT_TRUE(g.has_value());
  const CompiledExpr cg(*g, m.param_values, m.def_bodies);
  const std::vector<double> x{0.3, 0.2, 0.5};
  EXPECT_DOUBLE_EQ(cg(x), 2.0 * 0.2);
}

TEST(Expr, CompiledMatchesTree) {
  const auto m = test::model("bike");
  const std::vector<double> x{0.4, 0.2, 0.1, 0.05, 0.25};
  for (const auto& t : m.transitions) {
    const CompiledExpr c(t.rate, m.param_values, m.def_bodies);
    const CompiledExpr inl(inline_defs(t.rate, m.def_bodies), m.param_values, {});
    EXPECT_DOUBLE_EQ(c(x), inl(x)) << t.name;
  }
}

TEST(Expr, CheckedRate) {
  const std::vector<double> x{1.0};
  EXPECT_EQ(checked_rate(-1e-13, "t", x), 0.0);
  EXPECT_THROW(checked_rate(-1e-6, "t", x), NegativeRate);
  EXPECT_THROW(checked_rate(std::numeric_limits<double>::infinity(), "t", x), NonFiniteRate);
}

TEST(Collective, InitialCountsSumToN) {
  const auto m = parse_model("model m\nstates a, b, c\ninit x_a = 0.335\ninit x_b = 0.335\ninit x_c = 0.33\n");
  for (int N : {1, 2, 3, 7, 100, 301}) {
    const auto p = initial_counts(m, N);
    int sum = 0;
    for (int c : p.counts) sum += c;
    EXPECT_EQ(sum, N);
  }
  EXPECT_EQ(initial_counts(m, 3).counts, (std::vector<int>{1, 1, 1}));
}

TEST(Collective, StateSpaceEnumeration) {
  EXPECT_EQ(population_space_size(3, 5), 35u);
  const auto states = enumerate_population_states(3, 5);
  ASSERT_EQ(states.size(), 35u);
  EXPECT_EQ(states.front(), (std::vector<int>{3, 0, 0, 0, 0}));
  EXPECT_EQ(states.back(), (std::vector<int>{0, 0, 0, 0, 3}));
}

TEST(Collective, GeneratorRowsSumToZero) {
  const auto m = test::model("bike");
  const auto chain = build_collective_generator(m, 3);
  ASSERT_EQ(chain.states.size(), 35u);
  const Eigen::VectorXd sums = chain.generator * Eigen::VectorXd::Ones(chain.generator.cols());
  EXPECT_LT(sums.cwiseAbs().maxCoeff(), 1e-12);
  for (int k = 0; k < chain.generator.outerSize(); ++k)
    for (SparseGenerator::InnerIterator it(chain.generator, k); it; ++it)
      if (it.row() != it.col()) EXPECT_GE(it.value(), 0.0);
}

TEST(Collective, StateSpaceCap) {
  EXPECT_THROW(build_collective_generator(test::model("bike"), 100, 1000), StateSpaceTooLarge);
}

TEST(Validate, CleanModelsHaveNoErrors) {
  for (const char* name : {"bike", "sir", "two_state"}) {
    for (const auto& d : validate(test::model(name))) EXPECT_NE(d.severity, Severity::Error) << d.message;
  }
}

TEST(Validate, FlagsNegativeRate) {
  const auto m = parse_model(
      "model m\nstates a, b\ntransition t { rule a -> b; rate (x_a - 0.5) }\ninit x_a = 1\n");
  bool seen = false;
  for (const auto& d : validate(m)) seen |= d.code == "NegativeRate" && d.severity == Severity::Error;
  EXPECT_TRUE(seen);
}

TEST(Validate, SimplexSamples) {
  const auto pts = simplex_samples(4, 1000);
  ASSERT_GE(pts.size(), 1000u);
  for (const auto& p : pts) {
    double s = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace fluidmc
