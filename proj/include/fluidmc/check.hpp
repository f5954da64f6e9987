#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>

#include "fluidmc/fluid.hpp"
#include "fluidmc/formula.hpp"
#include "fluidmc/model.hpp"
#include "fluidmc/reward.hpp"

namespace fluidmc {

struct CheckResult {
  Verdict verdict = Verdict::True;
  /// Probability or reward value of a top-level P or R operator.
  double value = std::numeric_limits<double>::quiet_NaN();
  std::optional<RewardResult> reward;
};

/// Three-valued satisfaction of a state formula from state s at time 0.
/// Indeterminate propagates through negation; conjunction and disjunction
/// settle when one side decides. `=?` queries are only allowed at the top.
CheckResult check_formula(const PopulationModel& m, const Formula& f, std::size_t s, const FluidOptions& opts = {});

/// Same with the initial state drawn from p0. P and R operators take the
/// p0-weighted average of the per-state values; other state formulas need
/// p0 to be a point mass.
CheckResult check_formula(const PopulationModel& m, const Formula& f, std::span<const double> p0,
                          const FluidOptions& opts = {});

/// The state carrying all of p0, if any.
std::optional<std::size_t> point_mass(std::span<const double> p0);

}  // namespace fluidmc
