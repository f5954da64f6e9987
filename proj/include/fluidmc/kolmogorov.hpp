#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "fluidmc/fluid.hpp"
#include "fluidmc/model.hpp"
#include "fluidmc/ode.hpp"

namespace fluidmc {

/// Reward rates seen by the agent: rho_s per state and rho_t per transition.
struct RewardRates {
  std::vector<double> state;
  std::vector<double> transition;

  static RewardRates from(const RewardStructure& rw) { return {rw.state_reward, rw.transition_reward}; }
};

/// Row normalization guard for probability rows (same rule as the simplex
/// projection). Returns true when any row changed.
bool normalize_rows(std::span<double> p, std::size_t n);

/// Joint dense solution of dx/dt = F(x), dP/dt = P Q(x) and, optionally,
/// dR/dt = P (rho_s + sum_alpha rho_t(alpha) g_alpha(x)) for each row of P.
class TransientSolution {
 public:
  TransientSolution() = default;
  TransientSolution(std::shared_ptr<const ode::DenseSolution> sol, std::size_t n, std::size_t rows, bool reward,
                    double rtol, double atol);

  std::size_t n_states() const noexcept { return n_; }
  std::size_t rows() const noexcept { return rows_; }
  bool has_reward() const noexcept { return reward_; }
  double t_end() const noexcept { return sol_->t_end(); }
  const std::vector<double>& mesh() const noexcept { return sol_->mesh(); }
  const ode::Stats& stats() const noexcept { return sol_->stats(); }

  std::vector<double> x(double t) const;
  Matrix P(double t) const;
  std::vector<double> row(double t, std::size_t r) const;
  /// Accumulated reward of row r at time t.
  double reward(double t, std::size_t r) const;
  /// Final P (after the last projection).
  Matrix final_P() const;
  double final_reward(std::size_t r) const;
  FluidTrajectory fluid() const { return FluidTrajectory(sol_, n_, rtol_, atol_); }

 private:
  std::shared_ptr<const ode::DenseSolution> sol_;
  std::size_t n_ = 0;
  std::size_t rows_ = 0;
  bool reward_ = false;
  double rtol_ = 0.0;
  double atol_ = 0.0;
};

/// Integrates the fluid ODE from the model's initial densities jointly with
/// the forward Kolmogorov equation of `gen` from P(0) = p0 (rows x n) over
/// [0, T]. The reward block is excluded from step-size control.
TransientSolution solve_transient(const PopulationModel& m, const AgentGenerator& gen, const Matrix& p0, double T,
                                  const RewardRates* reward = nullptr, const FluidOptions& opts = {});

/// dP/dt = P Q(x(t)) over [ta, tb] with x taken from a precomputed
/// trajectory. Dense solution over the flattened rows x n block.
ode::DenseSolution propagate(const FluidTrajectory& traj, const AgentGenerator& gen, const Matrix& p0, double ta,
                             double tb, const FluidOptions& opts = {});

Matrix unflatten(std::span<const double> y, std::size_t rows, std::size_t n);

}  // namespace fluidmc
