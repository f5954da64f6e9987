#include <cmath>
#include <cstdio>
#include <random>

#include <gtest/gtest.h>

#include "fluidmc/check.hpp"
#include "fluidmc/csl.hpp"
#include "fluidmc/error.hpp"
#include "fluidmc/formula.hpp"
#include "fluidmc/sim.hpp"
#include "test_common.hpp"

namespace fluidmc {
namespace {

const double kE = std::exp(1.0);

FormulaPtr parse(const std::string& s, const PopulationModel& m) { return parse_formula(s, m); }

TEST(Formula, ParsesOperators) {
  const auto m = test::model("bike");
  const auto f = parse("P>=0.19 [ !at_d U[0,50] at_d ]", m);
  EXPECT_EQ(f->kind, Formula::Kind::Prob);
  EXPECT_EQ(f->bound.cmp, Comparison::GreaterEqual);
  EXPECT_DOUBLE_EQ(f->bound.value, 0.19);
  EXPECT_EQ(f->path.kind, PathFormula::Kind::Until);
  EXPECT_DOUBLE_EQ(f->path.t2, 50.0);
  const auto r = parse("R{cost}=? [ F<=1000 at_d ]", m);
  EXPECT_EQ(r->reward.op, RewardOp::Reachability);
  EXPECT_EQ(r->reward.reward, 0u);
  EXPECT_TRUE(r->bound.is_query());
}

TEST(Formula, RoundTripsThroughText) {
  const auto m = test::model("bike");
  for (const char* s : {"P<0.3 [ X[0,2] at_b ]", "R{diss}<=5 [ I=10 ]", "at_a & !(at_b | riding)",
                        "P=? [ true U[1,4] at_d ]", "R{cost}>1 [ S ]"}) {
    const auto f = parse(s, m);
    const auto g = parse(to_string(*f, m), m);
    EXPECT_EQ(to_string(*f, m), to_string(*g, m)) << s;
  }
}

TEST(Formula, Errors) {
  const auto m = test::model("bike");
  EXPECT_THROW(parse("P=? [ at_nowhere U[0,1] at_d ]", m), UnknownIdentifier);
  EXPECT_THROW(parse("R{nothing}=? [ C<=1 ]", m), UnknownIdentifier);
  EXPECT_THROW(parse("P=? [ P>0.5 [ X[0,1] at_d ] U[0,1] at_d ]", m), NestedFormulaUnsupported);
  EXPECT_THROW(parse("P=? [ at_a U[2,1] at_d ]", m), InputError);
  EXPECT_THROW(parse("P>=1.5 [ X[0,1] at_d ]", m), InputError);
  EXPECT_THROW(parse("P=? [ at_a U[0,1] ", m), ParseError);
}

TEST(Formula, SatisfactionSetAndStateNames) {
  const auto m = test::model("bike");
  const auto f = parse("riding | d", m);
  EXPECT_TRUE(is_propositional(*f));
  EXPECT_EQ(satisfaction_set(*f, m.n_states()), (std::vector<bool>{false, true, false, true, true}));
}

TEST(Formula, Decide) {
  const Bound ge{Comparison::GreaterEqual, 0.5};
  EXPECT_EQ(decide(0.6, ge), Verdict::True);
  EXPECT_EQ(decide(0.4, ge), Verdict::False);
  EXPECT_EQ(decide(0.5 + 1e-8, ge), Verdict::Indeterminate);
  EXPECT_EQ(decide(0.2, Bound{}), Verdict::Value);
}

TEST(Csl, UntilClosedForm) {
  const auto m = test::flip_model(1.0, 1.0);
  const auto f = parse("P=? [ at_on U[0,1] at_off ]", m);
  EXPECT_NEAR(check_path_probability(m, f->path, 0, 0.0), 1 - 1 / kE, 1e-8);
  const auto g = parse("P=? [ X[0,1] at_off ]", m);
  EXPECT_NEAR(check_path_probability(m, g->path, 0, 0.0), 1 - 1 / kE, 1e-8);
}

TEST(Csl, TwoPhaseUntilMatchesUniformization) {
  const auto m = test::flip_model(2.0, 1.0);
  const auto f = parse("P=? [ at_on U[0.5,1.5] at_off ]", m);
  // Stay in on for 0.5, then reach off within 1 with off absorbing.
  const double stay = std::exp(-2.0 * 0.5);
  const double reach = 1 - std::exp(-2.0);
  EXPECT_NEAR(check_path_probability(m, f->path, 0, 0.0), stay * reach, 1e-8);
}

// Property: rows of the reach signal are probability distributions, and the
// signal agrees with direct checks at the sampled initial times.
TEST(Csl, ReachSignalAgreesWithDirectChecks) {
  const auto m = test::model("bike");
  const auto f = parse("P=? [ !at_d U[0,50] at_d ]", m);
  const auto s = m.state_index("a");
  const auto fn = path_probability_function(m, f->path, s, 100.0);
  for (double t0 : {0.0, 17.3, 48.0, 99.0})
    EXPECT_NEAR(fn(t0), check_path_probability(m, f->path, s, t0), 1e-7) << t0;

  const auto goal = satisfaction_set(*f->path.right, m.n_states());
  std::vector<bool> unsafe(m.n_states(), false);
  const auto sig = reach_signal(m, goal, unsafe, 50.0, 100.0);
  for (double t = 0.0; t <= 100.0; t += 7.1) {
    const Matrix pi = sig(t);
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
      EXPECT_NEAR(pi.row(i).sum(), 1.0, 1e-9);
      EXPECT_GE(pi.row(i).minCoeff(), -1e-12);
    }
  }
}

TEST(Csl, BooleanSignalOfKnownFunction) {
  const ProbabilityFunction f([](double t) { return std::sin(t); }, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0});
  const auto sig = boolean_signal(f, Bound{Comparison::Greater, 0.5}, 0.0, 7.0);
  ASSERT_EQ(sig.crossings.size(), 3u);
  EXPECT_NEAR(sig.crossings[0], std::asin(0.5), 1e-9);
  EXPECT_NEAR(sig.crossings[1], M_PI - std::asin(0.5), 1e-9);
  EXPECT_NEAR(sig.crossings[2], 2 * M_PI + std::asin(0.5), 1e-9);
  EXPECT_FALSE(sig.value_at(0.1));
  EXPECT_TRUE(sig.value_at(1.0));
  EXPECT_FALSE(sig.value_at(4.0));
  EXPECT_TRUE(sig.value_at(6.9));
}

// Property: the signal agrees with the pointwise comparison away from crossings.
TEST(Csl, BooleanSignalMatchesPointwiseComparison) {
  const auto m = test::model("bike");
  const auto f = parse("P>=0.19 [ !at_d U[0,50] at_d ]", m);
  const auto s = m.state_index("a");
  const auto sig = boolean_signal(m, *f, s, 100.0);
  const auto fn = path_probability_function(m, f->path, s, 100.0);
  EXPECT_EQ(sig.crossings.size(), 1u);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int k = 0; k < 200; ++k) {
    const double t = u(rng);
    bool near = false;
    for (double c : sig.crossings) near |= std::abs(t - c) < 1e-6;
    if (near) continue;
    EXPECT_EQ(sig.value_at(t), fn(t) >= 0.19) << t;
  }
}

TEST(Csl, TrivialThresholdGivesConstantSignal) {
  const auto m = test::model("bike");
  const auto f = parse("P>=0 [ !at_d U[0,50] at_d ]", m);
  const auto sig = boolean_signal(m, *f, 0, 20.0);
  EXPECT_TRUE(sig.constant());
  EXPECT_TRUE(sig.value_at(10.0));
}

TEST(Check, ThreeValuedCombinations) {
  const auto m = test::flip_model(1.0, 1.0);
  const double p = 1 - 1 / kE;
  const auto yes = "P>=0.5 [ X[0,1] at_off ]";
  const auto no = "P>=0.7 [ X[0,1] at_off ]";
  char buf[64];
  std::snprintf(buf, sizeof buf, "P>=%.12g [ X[0,1] at_off ]", p);
  const std::string tie = buf;
  auto verdict = [&](const std::string& s) { return check_formula(m, *parse(s, m), 0).verdict; };
  EXPECT_EQ(verdict(yes), Verdict::True);
  EXPECT_EQ(verdict(no), Verdict::False);
  EXPECT_EQ(verdict(tie), Verdict::Indeterminate);
  EXPECT_EQ(verdict("!" + tie), Verdict::Indeterminate);
  EXPECT_EQ(verdict(tie + " & " + no), Verdict::False);
  EXPECT_EQ(verdict(tie + " | " + yes), Verdict::True);
  EXPECT_EQ(verdict(tie + " & " + yes), Verdict::Indeterminate);
  EXPECT_EQ(verdict("at_on & " + std::string(yes)), Verdict::True);
  EXPECT_EQ(verdict("at_off | " + std::string(no)), Verdict::False);
}

TEST(Check, QueryValue) {
  const auto m = test::flip_model(1.0, 1.0);
  const auto r = check_formula(m, *parse("P=? [ at_on U[0,1] at_off ]", m), 0);
  EXPECT_EQ(r.verdict, Verdict::Value);
  EXPECT_NEAR(r.value, 1 - 1 / kE, 1e-8);
  EXPECT_THROW(check_formula(m, *parse("at_on & P=? [ X[0,1] at_off ]", m), 0), InputError);
}

TEST(Check, InitialDistributionIsWeightedAverage) {
  const auto m = test::flip_model(2.0, 1.0);
  const std::vector<double> p0{0.25, 0.75};
  for (const char* text : {"P=? [ true U[0,1] at_off ]", "R{occ}=? [ C<=2 ]", "R{flips}=? [ I=0.5 ]"}) {
    const auto f = parse(text, m);
    const double on = check_formula(m, *f, 0).value;
    const double off = check_formula(m, *f, 1).value;
    EXPECT_NEAR(check_formula(m, *f, p0).value, 0.25 * on + 0.75 * off, 1e-12) << text;
  }
  const auto path = parse("P=? [ true U[0,1] at_off ]", m)->path;
  const auto fn = path_probability_function(m, path, p0, 2.0);
  EXPECT_NEAR(fn(0.7), 0.25 * check_path_probability(m, path, 0, 0.7) + 0.75 * check_path_probability(m, path, 1, 0.7),
              1e-8);
  EXPECT_THROW(check_formula(m, *parse("at_on", m), p0), InputError);
  const std::vector<double> point{0.0, 1.0};
  EXPECT_EQ(check_formula(m, *parse("at_on", m), point).verdict, Verdict::False);
}

}  // namespace
}  // namespace fluidmc
