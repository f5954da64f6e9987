#include "fluidmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "fluidmc/error.hpp"

namespace fluidmc {

NegativeRate::NegativeRate(const std::string& transition, double value, std::vector<double> x)
    : NumericError("NegativeRate(" + transition + ", " + std::to_string(value) + ")"), x_(std::move(x)) {}

NonFiniteRate::NonFiniteRate(const std::string& transition, std::vector<double> x)
    : NumericError("NonFiniteRate(" + transition + ")"), x_(std::move(x)) {}

namespace {
std::string describe_state(double t, const std::vector<double>& y) {
  std::ostringstream os;
  os << "StepSizeUnderflow at t=" << t << ", state=[";
  for (std::size_t i = 0; i < y.size() && i < 16; ++i) os << (i ? ", " : "") << y[i];
  if (y.size() > 16) os << ", ...";
  os << "]";
  return os.str();
}
}  // namespace

StepSizeUnderflow::StepSizeUnderflow(double t, std::vector<double> state)
    : NumericError(describe_state(t, state)), t_(t), state_(std::move(state)) {}

NoConvergence::NoConvergence(double t_limit, double residual)
    : NumericError("NoConvergence(t_limit=" + std::to_string(t_limit) + ", residual=" +
                   std::to_string(residual) + ")"),
      residual_(residual) {}

NonUniqueInvariantMeasure::NonUniqueInvariantMeasure(std::vector<std::vector<double>> per_class)
    : NumericError("NonUniqueInvariantMeasure: " + std::to_string(per_class.size()) + " closed classes"),
      measures_(std::move(per_class)) {}

AgentStateSpace::AgentStateSpace(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw InvalidModel("agent state space must have at least one state");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw InvalidModel("empty state name");
    if (!seen.insert(n).second) throw DuplicateName(n);
  }
}

std::optional<std::size_t> AgentStateSpace::index(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

UpdateVector update_vector(const Transition& t, std::size_t n_states) {
  UpdateVector v(n_states, 0);
  for (const Rule& r : t.rules) {
    v.at(r.to) += r.multiplicity;
    v.at(r.from) -= r.multiplicity;
  }
  return v;
}

std::vector<int> outflow_vector(const Transition& t, std::size_t n_states) {
  std::vector<int> out(n_states, 0);
  for (const Rule& r : t.rules) out.at(r.from) += r.multiplicity;
  return out;
}

RewardStructure scaled(const RewardStructure& rw, double factor) {
  RewardStructure out = rw;
  for (double& v : out.state_reward) v *= factor;
  for (double& v : out.transition_reward) v *= factor;
  return out;
}

RewardStructure combined(const RewardStructure& a, const RewardStructure& b) {
  RewardStructure out = a;
  out.name = a.name + "+" + b.name;
  for (std::size_t i = 0; i < out.state_reward.size(); ++i) out.state_reward[i] += b.state_reward.at(i);
  for (std::size_t i = 0; i < out.transition_reward.size(); ++i)
    out.transition_reward[i] += b.transition_reward.at(i);
  return out;
}

SymbolTable PopulationModel::symbols() const {
  return SymbolTable{param_names, param_values, agent.names(), def_names, def_bodies};
}

std::optional<std::size_t> PopulationModel::transition_index(std::string_view n) const {
  for (std::size_t i = 0; i < transitions.size(); ++i)
    if (transitions[i].name == n) return i;
  return std::nullopt;
}

const Label* PopulationModel::label(std::string_view n) const {
  for (const auto& l : labels)
    if (l.name == n) return &l;
  return nullptr;
}

const RewardStructure* PopulationModel::reward(std::string_view n) const {
  for (const auto& r : rewards)
    if (r.name == n) return &r;
  return nullptr;
}

std::size_t PopulationModel::state_index(std::string_view n) const {
  if (auto i = agent.index(n)) return *i;
  throw UnknownIdentifier(std::string(n));
}

bool PopulationModel::unit_multiplicity() const {
  for (const auto& t : transitions)
    for (const auto& r : t.rules)
      if (r.multiplicity != 1) return false;
  return true;
}

void check_invariants(const PopulationModel& m) {
  const std::size_t n = m.n_states();
  if (n == 0) throw InvalidModel("model has no states");
  if (m.init_density.size() != n) throw InvalidModel("initial density has wrong dimension");
  double total = 0.0;
  for (double d : m.init_density) {
    if (!(d >= 0.0)) throw InvalidModel("initial densities must be nonnegative");
    total += d;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidModel("initial densities sum to " + std::to_string(total) + ", expected 1");

  std::set<std::string> names;
  for (const auto& t : m.transitions) {
    if (!names.insert(t.name).second) throw DuplicateName(t.name);
    if (t.rate.empty()) throw InvalidModel("transition '" + t.name + "' has no rate");
    for (const Rule& r : t.rules) {
      if (r.from >= n || r.to >= n) throw InvalidModel("rule state out of range in '" + t.name + "'");
      if (r.from == r.to) throw InvalidModel("rule source equals target in '" + t.name + "'");
      if (r.multiplicity < 1) throw InvalidModel("multiplicity must be >= 1 in '" + t.name + "'");
    }
  }
  names.clear();
  for (const auto& l : m.labels) {
    if (!names.insert(l.name).second) throw DuplicateName(l.name);
    for (std::size_t s : l.states)
      if (s >= n) throw InvalidModel("label '" + l.name + "' references a missing state");
  }
  names.clear();
  for (const auto& rw : m.rewards) {
    if (!names.insert(rw.name).second) throw DuplicateName(rw.name);
    if (rw.state_reward.size() != n || rw.transition_reward.size() != m.transitions.size())
      throw InvalidModel("reward '" + rw.name + "' has wrong dimension");
    for (double v : rw.state_reward)
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidModel("reward '" + rw.name + "' has a negative entry");
    for (double v : rw.transition_reward)
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidModel("reward '" + rw.name + "' has a negative entry");
  }
}

RateFunctions::RateFunctions(const PopulationModel& m) {
  compiled_.reserve(m.transitions.size());
  for (const auto& t : m.transitions) {
    compiled_.emplace_back(t.rate, m.param_values, m.def_bodies);
    updates_.push_back(update_vector(t, m.n_states()));
    outflows_.push_back(outflow_vector(t, m.n_states()));
    moves_.push_back(std::any_of(updates_.back().begin(), updates_.back().end(), [](int v) { return v != 0; }));
    names_.push_back(t.name);
  }
}

bool RateFunctions::enabled(std::size_t tau, std::span<const int> counts) const {
  if (!moves_[tau]) return false;
  const auto& out = outflows_[tau];
  for (std::size_t i = 0; i < out.size(); ++i)
    if (counts[i] < out[i]) return false;
  return true;
}

double RateFunctions::rate(std::size_t tau, std::span<const double> x) const {
  return checked_rate(compiled_[tau](x), names_[tau], x);
}

}  // namespace fluidmc
