#include "fluidmc/check.hpp"

#include <cmath>

#include "fluidmc/csl.hpp"
#include "fluidmc/error.hpp"

namespace fluidmc {

namespace {

Verdict from_bool(bool b) { return b ? Verdict::True : Verdict::False; }

Verdict negate(Verdict v) {
  switch (v) {
    case Verdict::True: return Verdict::False;
    case Verdict::False: return Verdict::True;
    default: return v;
  }
}

Verdict evaluate(const PopulationModel& m, const Formula& f, std::size_t s, const FluidOptions& opts) {
  switch (f.kind) {
    case Formula::Kind::True: return Verdict::True;
    case Formula::Kind::False: return Verdict::False;
    case Formula::Kind::Atom: return from_bool(f.atom_states.at(s));
    case Formula::Kind::Not: return negate(evaluate(m, *f.lhs, s, opts));
    case Formula::Kind::And: {
      const Verdict a = evaluate(m, *f.lhs, s, opts);
      if (a == Verdict::False) return a;
      const Verdict b = evaluate(m, *f.rhs, s, opts);
      if (b == Verdict::False) return b;
      return a == Verdict::True && b == Verdict::True ? Verdict::True : Verdict::Indeterminate;
    }
    case Formula::Kind::Or: {
      const Verdict a = evaluate(m, *f.lhs, s, opts);
      if (a == Verdict::True) return a;
      const Verdict b = evaluate(m, *f.rhs, s, opts);
      if (b == Verdict::True) return b;
      return a == Verdict::False && b == Verdict::False ? Verdict::False : Verdict::Indeterminate;
    }
    case Formula::Kind::Prob:
    case Formula::Kind::Reward: {
      if (f.bound.is_query()) throw InputError("=? queries cannot be combined with other formulas");
      const CheckResult r = check_formula(m, f, s, opts);
      return r.verdict;
    }
  }
  return Verdict::Indeterminate;
}

}  // namespace

CheckResult check_formula(const PopulationModel& m, const Formula& f, std::size_t s, const FluidOptions& opts) {
  if (s >= m.n_states()) throw InputError("initial state out of range");
  CheckResult out;
  if (f.kind == Formula::Kind::Prob) {
    out.value = check_path_probability(m, f.path, s, 0.0, opts);
    out.verdict = decide(out.value, f.bound);
  } else if (f.kind == Formula::Kind::Reward) {
    const RewardCheck rc = check_reward_formula(m, f, s, opts);
    out.value = rc.result.value;
    out.verdict = rc.verdict;
    out.reward = rc.result;
  } else {
    out.verdict = evaluate(m, f, s, opts);
  }
  return out;
}

std::optional<std::size_t> point_mass(std::span<const double> p0) {
  for (std::size_t i = 0; i < p0.size(); ++i)
    if (std::abs(p0[i] - 1.0) <= 1e-12) return i;
  return std::nullopt;
}

CheckResult check_formula(const PopulationModel& m, const Formula& f, std::span<const double> p0,
                          const FluidOptions& opts) {
  if (p0.size() != m.n_states()) throw InputError("initial distribution has the wrong number of states");
  if (const auto s = point_mass(p0)) return check_formula(m, f, *s, opts);
  if (f.kind != Formula::Kind::Prob && f.kind != Formula::Kind::Reward)
    throw InputError("state formulas other than P and R need a single initial state");
  CheckResult out;
  if (f.kind == Formula::Kind::Reward && f.reward.op == RewardOp::SteadyState) {
    out = check_formula(m, f, std::size_t{0}, opts);
    return out;
  }
  double value = 0.0;
  for (std::size_t s = 0; s < p0.size(); ++s) {
    if (p0[s] <= 0.0) continue;
    const CheckResult r = check_formula(m, f, s, opts);
    value += p0[s] * r.value;
    if (r.reward && !out.reward) out.reward = r.reward;
  }
  out.value = value;
  out.verdict = decide(value, f.bound);
  if (out.reward) {
    out.reward->value = value;
    out.reward->initial_state = kNoState;
  }
  return out;
}

}  // namespace fluidmc
