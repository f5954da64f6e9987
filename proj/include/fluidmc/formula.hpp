#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fluidmc/model.hpp"

namespace fluidmc {

enum class Comparison { Less, LessEqual, Greater, GreaterEqual, Query };

struct Bound {
  Comparison cmp = Comparison::Query;
  double value = 0.0;

  bool is_query() const noexcept { return cmp == Comparison::Query; }
  friend bool operator==(const Bound&, const Bound&) = default;
};

/// Outcome of comparing a value with a bound under the decision margin.
enum class Verdict { True, False, Indeterminate, Value };

inline constexpr double kDecisionMargin = 1e-7;

Verdict decide(double value, const Bound& b, double margin = kDecisionMargin);
std::string to_string(Verdict v);
std::string to_string(Comparison c);

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct PathFormula {
  enum class Kind { Next, Until };
  Kind kind = Kind::Until;
  double t1 = 0.0;
  double t2 = 0.0;
  FormulaPtr left;   ///< phi1 of until; unused for next
  FormulaPtr right;  ///< phi2 of until, phi of next
};

enum class RewardOp { Cumulative, Instantaneous, SteadyState, Reachability };

struct RewardQuery {
  RewardOp op = RewardOp::Cumulative;
  std::size_t reward = 0;  ///< index into PopulationModel::rewards
  double T = 0.0;
  FormulaPtr target;  ///< Reachability only
};

/// Time-bounded CSL state formula with reward operators.
struct Formula {
  enum class Kind { True, False, Atom, Not, And, Or, Prob, Reward };
  Kind kind = Kind::True;
  std::string atom;
  std::vector<bool> atom_states;  ///< states carrying the atomic proposition
  FormulaPtr lhs;
  FormulaPtr rhs;
  Bound bound;
  PathFormula path;
  RewardQuery reward;
};

/// Atomic propositions are label names or state names. Throws ParseError,
/// UnknownIdentifier or NestedFormulaUnsupported.
FormulaPtr parse_formula(std::string_view text, const PopulationModel& m);

struct FormulaLine {
  std::string text;
  FormulaPtr formula;
};

/// One formula per line; blank lines and `#` comments are skipped.
std::vector<FormulaLine> parse_formula_list(std::string_view text, const PopulationModel& m);

std::string to_string(const Formula& f, const PopulationModel& m);

/// No probability or reward operator anywhere inside.
bool is_propositional(const Formula& f);

/// Sat(f) for a propositional formula.
std::vector<bool> satisfaction_set(const Formula& f, std::size_t n_states);

}  // namespace fluidmc
