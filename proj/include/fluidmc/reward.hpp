#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fluidmc/fluid.hpp"
#include "fluidmc/formula.hpp"
#include "fluidmc/kolmogorov.hpp"
#include "fluidmc/model.hpp"
#include "fluidmc/ode.hpp"

namespace fluidmc {

inline constexpr std::size_t kNoState = std::numeric_limits<std::size_t>::max();

struct RewardDiagnostics {
  ode::Stats stats;
  double steady_residual = std::numeric_limits<double>::quiet_NaN();
  std::string steady_method;
  double t_relax = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> x_star;
  std::vector<double> invariant;  ///< pi* over agent states
};

struct RewardResult {
  RewardOp kind = RewardOp::Cumulative;
  double value = 0.0;
  double T = std::numeric_limits<double>::quiet_NaN();  ///< NaN for steady state
  std::size_t initial_state = kNoState;                   ///< kNoState for steady state
  RewardDiagnostics diagnostics;
};

/// Throws InputError unless rw matches the model and is nonnegative.
void check_reward_structure(const PopulationModel& m, const RewardStructure& rw);

RewardResult instantaneous_reward(const PopulationModel& m, const RewardStructure& rw, std::size_t s, double T,
                                  const FluidOptions& opts = {});
RewardResult cumulative_reward(const PopulationModel& m, const RewardStructure& rw, std::size_t s, double T,
                               const FluidOptions& opts = {});
RewardResult steady_state_reward(const PopulationModel& m, const RewardStructure& rw,
                                 const SteadyStateOptions& opts = {});
/// Cumulative reward up to T with `target` absorbing and its state rewards zeroed.
RewardResult reachability_reward(const PopulationModel& m, const RewardStructure& rw, const std::vector<bool>& target,
                                 std::size_t s, double T, const FluidOptions& opts = {});

/// Invariant measure of a generator. Throws NonUniqueInvariantMeasure when
/// more than one closed class exists.
std::vector<double> invariant_measure(const Matrix& q);

/// Values of a cumulative, instantaneous or reachability reward at every
/// horizon of `grid` (nondecreasing, starting at >= 0) from one solve.
std::vector<double> reward_curve(const PopulationModel& m, RewardOp op, const RewardStructure& rw,
                                 const std::vector<bool>& target, std::size_t s, std::span<const double> grid,
                                 const FluidOptions& opts = {});

struct RewardCheck {
  Verdict verdict = Verdict::Value;
  RewardResult result;
};

/// Evaluates a reward formula from state s at time 0.
RewardCheck check_reward_formula(const PopulationModel& m, const Formula& f, std::size_t s,
                                 const FluidOptions& opts = {});

}  // namespace fluidmc
