#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace fluidmc::ode {

struct Options {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  ///< 0 selects the step automatically
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 50'000'000;
  /// Only components [0, control_dim) enter the error norm. Trailing
  /// components that are pure quadratures of the others (reward
  /// accumulators) are left out so they do not perturb the step sequence.
  std::size_t control_dim = std::numeric_limits<std::size_t>::max();
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

enum class StepAction { Continue, Modified, Stop };

using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;
/// Called after every accepted step with the new state; may project it.
using StepHook = std::function<StepAction(double t, std::span<double> y)>;

/// Dense-output solution: accepted step mesh plus the fourth-order
/// continuous extension of each Dormand-Prince step.
class DenseSolution {
 public:
  DenseSolution() = default;

  std::size_t dim() const noexcept { return dim_; }
  double t_begin() const noexcept { return times_.front(); }
  double t_end() const noexcept { return times_.back(); }
  std::size_t steps() const noexcept { return times_.size() - 1; }
  /// Step boundaries, t_begin first.
  const std::vector<double>& mesh() const noexcept { return times_; }
  const Stats& stats() const noexcept { return stats_; }

  void eval(double t, std::span<double> out) const { eval(t, out, 0); }
  /// Components [first, first + out.size()) only.
  void eval(double t, std::span<double> out, std::size_t first) const;
  std::vector<double> operator()(double t) const;
  /// State after the last accepted step (after any hook projection).
  const std::vector<double>& final_state() const noexcept { return y_end_; }

 private:
  friend DenseSolution integrate(const Rhs&, double, double, std::vector<double>, const Options&,
                                 const StepHook&);
  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<double> coeffs_;  // 5 * dim_ per step
  std::vector<double> y_end_;
  Stats stats_;
};

/// Adaptive explicit Runge-Kutta 5(4) (Dormand-Prince) from t0 to t1.
/// Throws StepSizeUnderflow when the step collapses.
DenseSolution integrate(const Rhs& f, double t0, double t1, std::vector<double> y0, const Options& opts = {},
                        const StepHook& hook = {});

}  // namespace fluidmc::ode
