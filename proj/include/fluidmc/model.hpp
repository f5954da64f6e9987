#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fluidmc/expr.hpp"

namespace fluidmc {

/// Ordered set of agent-state names.
class AgentStateSpace {
 public:
  AgentStateSpace() = default;
  explicit AgentStateSpace(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<std::size_t> index(std::string_view name) const;

  friend bool operator==(const AgentStateSpace&, const AgentStateSpace&) = default;

 private:
  std::vector<std::string> names_;
};

/// Update rule `from -> to` with its multiplicity inside one transition.
struct Rule {
  std::size_t from = 0;
  std::size_t to = 0;
  int multiplicity = 1;
  /// Per-capita rate g such that f = x_from * g; optional.
  std::optional<Expr> percap;

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct Transition {
  std::string name;
  std::vector<Rule> rules;
  /// Limit rate f(x) over densities.
  Expr rate;

  friend bool operator==(const Transition&, const Transition&) = default;
};

using UpdateVector = std::vector<int>;

/// Inflow minus outflow multiplicity per state.
UpdateVector update_vector(const Transition& t, std::size_t n_states);

/// Agents consumed from each state when the transition fires; the
/// transition is enabled in a population state only if counts >= outflow.
std::vector<int> outflow_vector(const Transition& t, std::size_t n_states);

struct Label {
  std::string name;
  std::vector<std::size_t> states;

  friend bool operator==(const Label&, const Label&) = default;
};

/// State rewards (per unit of time) and transition rewards (per tagged jump).
/// Unspecified entries are zero.
struct RewardStructure {
  std::string name;
  std::vector<double> state_reward;
  std::vector<double> transition_reward;

  friend bool operator==(const RewardStructure&, const RewardStructure&) = default;
};

RewardStructure scaled(const RewardStructure& rw, double factor);
RewardStructure combined(const RewardStructure& a, const RewardStructure& b);

struct PopulationModel {
  std::string name;
  AgentStateSpace agent;
  std::vector<std::string> param_names;
  std::vector<double> param_values;
  std::vector<std::string> def_names;
  std::vector<Expr> def_bodies;
  std::vector<Transition> transitions;
  std::vector<double> init_density;
  std::vector<Label> labels;
  std::vector<RewardStructure> rewards;

  std::size_t n_states() const noexcept { return agent.size(); }
  SymbolTable symbols() const;

  std::optional<std::size_t> transition_index(std::string_view name) const;
  const Label* label(std::string_view name) const;
  const RewardStructure* reward(std::string_view name) const;
  /// Throws UnknownIdentifier when the state does not exist.
  std::size_t state_index(std::string_view name) const;

  /// True when every rule has multiplicity one.
  bool unit_multiplicity() const;

  friend bool operator==(const PopulationModel&, const PopulationModel&) = default;
};

/// Checks the structural invariants (unique names, simplex initial
/// condition, rule ranges). Throws InputError subclasses.
void check_invariants(const PopulationModel& m);

/// Compiled limit rate functions f of every transition.
class RateFunctions {
 public:
  explicit RateFunctions(const PopulationModel& m);

  std::size_t size() const noexcept { return compiled_.size(); }
  /// f_tau(x) with the negative-rate tolerance applied.
  double rate(std::size_t tau, std::span<const double> x) const;
  /// Unchecked evaluation.
  double raw(std::size_t tau, std::span<const double> x) const noexcept { return compiled_[tau](x); }
  const UpdateVector& update(std::size_t tau) const { return updates_[tau]; }
  const std::vector<int>& outflow(std::size_t tau) const { return outflows_[tau]; }
  /// counts >= outflow and the update moves at least one agent.
  bool enabled(std::size_t tau, std::span<const int> counts) const;
  const std::string& name(std::size_t tau) const { return names_[tau]; }

 private:
  std::vector<CompiledExpr> compiled_;
  std::vector<UpdateVector> updates_;
  std::vector<std::vector<int>> outflows_;
  std::vector<char> moves_;
  std::vector<std::string> names_;
};

}  // namespace fluidmc
