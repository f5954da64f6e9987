#include "fluidmc/reward.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "fluidmc/csl.hpp"
#include "fluidmc/error.hpp"

namespace fluidmc {

void check_reward_structure(const PopulationModel& m, const RewardStructure& rw) {
  if (rw.state_reward.size() != m.n_states() || rw.transition_reward.size() != m.transitions.size())
    throw InputError("reward structure '" + rw.name + "' does not match the model");
  auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
  if (std::any_of(rw.state_reward.begin(), rw.state_reward.end(), bad) ||
      std::any_of(rw.transition_reward.begin(), rw.transition_reward.end(), bad))
    throw InputError("reward structure '" + rw.name + "' has a negative or non-finite entry");
}

namespace {

void check_args(const PopulationModel& m, std::size_t s, double T) {
  if (s >= m.n_states()) throw InputError("initial state out of range");
  if (!(T >= 0.0) || !std::isfinite(T)) throw InputError("time bound must be finite and >= 0");
}

Matrix start_row(std::size_t n, std::size_t s) {
  Matrix p = Matrix::Zero(1, static_cast<Eigen::Index>(n));
  p(0, static_cast<Eigen::Index>(s)) = 1.0;
  return p;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * b[i];
  return v;
}

TransientSolution cumulative_solve(const PopulationModel& m, const AgentGenerator& gen, const RewardRates& rates,
                                   std::size_t s, double T, const FluidOptions& opts) {
  return solve_transient(m, gen, start_row(m.n_states(), s), T, &rates, opts);
}

// Absorbing modification of the generator plus the zeroed state rewards.
std::pair<AgentGenerator, RewardRates> reach_problem(const PopulationModel& m, const RewardStructure& rw,
                                                     const std::vector<bool>& target) {
  if (target.size() != m.n_states()) throw InputError("target set has the wrong number of states");
  RewardRates rates = RewardRates::from(rw);
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i]) rates.state[i] = 0.0;
  return {AgentGenerator(m).with_absorbing(target), std::move(rates)};
}

}  // namespace

RewardResult instantaneous_reward(const PopulationModel& m, const RewardStructure& rw, std::size_t s, double T,
                                  const FluidOptions& opts) {
  check_reward_structure(m, rw);
  check_args(m, s, T);
  const AgentGenerator gen(m);
  const auto sol = solve_transient(m, gen, start_row(m.n_states(), s), T, nullptr, opts);
  const Matrix p = sol.final_P();
  RewardResult r;
  r.kind = RewardOp::Instantaneous;
  r.value = std::max(0.0, dot(std::span<const double>(p.data(), m.n_states()), rw.state_reward));
  r.T = T;
  r.initial_state = s;
  r.diagnostics.stats = sol.stats();
  return r;
}

RewardResult cumulative_reward(const PopulationModel& m, const RewardStructure& rw, std::size_t s, double T,
                               const FluidOptions& opts) {
  check_reward_structure(m, rw);
  check_args(m, s, T);
  const auto sol = cumulative_solve(m, AgentGenerator(m), RewardRates::from(rw), s, T, opts);
  RewardResult r;
  r.kind = RewardOp::Cumulative;
  r.value = std::max(0.0, sol.final_reward(0));
  r.T = T;
  r.initial_state = s;
  r.diagnostics.stats = sol.stats();
  return r;
}

RewardResult reachability_reward(const PopulationModel& m, const RewardStructure& rw, const std::vector<bool>& target,
                                 std::size_t s, double T, const FluidOptions& opts) {
  check_reward_structure(m, rw);
  check_args(m, s, T);
  const auto [gen, rates] = reach_problem(m, rw, target);
  const auto sol = cumulative_solve(m, gen, rates, s, T, opts);
  RewardResult r;
  r.kind = RewardOp::Reachability;
  r.value = std::max(0.0, sol.final_reward(0));
  r.T = T;
  r.initial_state = s;
  r.diagnostics.stats = sol.stats();
  return r;
}

namespace {

// Closed communicating classes from the transitive closure of the jump graph.
std::vector<std::vector<std::size_t>> closed_classes(const Matrix& q) {
  const auto n = static_cast<std::size_t>(q.rows());
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = 1;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) reach[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = 1;

  std::vector<std::vector<std::size_t>> out;
  std::vector<char> seen(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    std::vector<std::size_t> cls;
    bool closed = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (reach[i][j] && reach[j][i]) {
        cls.push_back(j);
        seen[j] = 1;
      } else if (reach[i][j]) {
        closed = false;
      }
    }
    if (closed) out.push_back(std::move(cls));
  }
  return out;
}

std::vector<double> class_measure(const Matrix& q, const std::vector<std::size_t>& cls) {
  const auto n = static_cast<std::size_t>(q.rows());
  const auto k = static_cast<Eigen::Index>(cls.size());
  Eigen::MatrixXd a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      a(i, j) = q(static_cast<Eigen::Index>(cls[static_cast<std::size_t>(j)]),
                  static_cast<Eigen::Index>(cls[static_cast<std::size_t>(i)]));
  a.row(k - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  b(k - 1) = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(b);
  if (!pi.allFinite()) throw NumericError("invariant measure solve failed");
  std::vector<double> out(n, 0.0);
  for (Eigen::Index i = 0; i < k; ++i) out[cls[static_cast<std::size_t>(i)]] = std::max(0.0, pi(i));
  project_simplex(out);
  return out;
}

}  // namespace

std::vector<double> invariant_measure(const Matrix& q) {
  if (q.rows() != q.cols() || q.rows() == 0) throw InputError("generator must be square and nonempty");
  const auto classes = closed_classes(q);
  if (classes.size() == 1) return class_measure(q, classes.front());
  std::vector<std::vector<double>> per_class;
  for (const auto& c : classes) per_class.push_back(class_measure(q, c));
  throw NonUniqueInvariantMeasure(std::move(per_class));
}

RewardResult steady_state_reward(const PopulationModel& m, const RewardStructure& rw,
                                 const SteadyStateOptions& opts) {
  check_reward_structure(m, rw);
  const SteadyState ss = steady_state(m, opts);
  const Matrix q = AgentGenerator(m)(ss.x_star);
  RewardResult r;
  r.kind = RewardOp::SteadyState;
  r.diagnostics.steady_residual = ss.residual;
  r.diagnostics.steady_method = ss.method;
  r.diagnostics.t_relax = ss.t_relax;
  r.diagnostics.x_star = ss.x_star;
  r.diagnostics.invariant = invariant_measure(q);
  r.value = std::max(0.0, dot(r.diagnostics.invariant, rw.state_reward));
  return r;
}

std::vector<double> reward_curve(const PopulationModel& m, RewardOp op, const RewardStructure& rw,
                                 const std::vector<bool>& target, std::size_t s, std::span<const double> grid,
                                 const FluidOptions& opts) {
  check_reward_structure(m, rw);
  if (grid.empty()) return {};
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() < 0.0)
    throw InputError("reward grid must be sorted and start at >= 0");
  const double T = grid.back();
  check_args(m, s, T);
  std::vector<double> out;
  out.reserve(grid.size());
  switch (op) {
    case RewardOp::Instantaneous: {
      const AgentGenerator gen(m);
      const auto sol = solve_transient(m, gen, start_row(m.n_states(), s), T, nullptr, opts);
      for (double t : grid) out.push_back(std::max(0.0, dot(sol.row(t, 0), rw.state_reward)));
      return out;
    }
    case RewardOp::Cumulative: {
      const auto sol = cumulative_solve(m, AgentGenerator(m), RewardRates::from(rw), s, T, opts);
      for (double t : grid) out.push_back(std::max(0.0, sol.reward(t, 0)));
      return out;
    }
    case RewardOp::Reachability: {
      const auto [gen, rates] = reach_problem(m, rw, target);
      const auto sol = cumulative_solve(m, gen, rates, s, T, opts);
      for (double t : grid) out.push_back(std::max(0.0, sol.reward(t, 0)));
      return out;
    }
    case RewardOp::SteadyState: break;
  }
  throw InputError("steady-state rewards have no time curve");
}

RewardCheck check_reward_formula(const PopulationModel& m, const Formula& f, std::size_t s,
                                 const FluidOptions& opts) {
  if (f.kind != Formula::Kind::Reward) throw InputError("not a reward formula");
  if (f.reward.reward >= m.rewards.size()) throw InputError("reward structure index out of range");
  const RewardStructure& rw = m.rewards[f.reward.reward];
  const double T = f.reward.T;
  RewardCheck c;
  switch (f.reward.op) {
    case RewardOp::Cumulative: c.result = cumulative_reward(m, rw, s, T, opts); break;
    case RewardOp::Instantaneous: c.result = instantaneous_reward(m, rw, s, T, opts); break;
    case RewardOp::SteadyState: c.result = steady_state_reward(m, rw); break;
    case RewardOp::Reachability:
      c.result = reachability_reward(m, rw, satisfaction_set(*f.reward.target, m.n_states()), s, T, opts);
      break;
  }
  c.verdict = decide(c.result.value, f.bound);
  return c;
}

}  // namespace fluidmc
