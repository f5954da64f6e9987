#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fluidmc/model.hpp"
#include "fluidmc/ode.hpp"

namespace fluidmc {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FluidOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
};

/// Compiled drift F(x) = sum_tau v_tau f_tau(x).
class Drift {
 public:
  explicit Drift(const PopulationModel& m);

  std::size_t n_states() const noexcept { return n_; }
  /// Rates are evaluated at max(x, 0) so that integrator stages slightly
  /// outside the simplex do not trip the negative-rate check.
  void operator()(std::span<const double> x, std::span<double> out) const;
  const RateFunctions& rates() const noexcept { return rates_; }

 private:
  struct Change {
    std::size_t state;
    double delta;
  };
  std::size_t n_;
  RateFunctions rates_;
  std::vector<std::vector<Change>> changes_;
};

std::vector<double> drift(const PopulationModel& m, std::span<const double> x);

/// Clamp negatives and renormalize when the simplex violation exceeds 1e-12.
/// Returns true when the values were changed.
bool project_simplex(std::span<double> x);

/// Dense fluid solution x(t) on [0, t_max]. May view the leading block of a
/// larger joint solution.
class FluidTrajectory {
 public:
  FluidTrajectory() = default;
  FluidTrajectory(std::shared_ptr<const ode::DenseSolution> sol, std::size_t n_states, double rtol, double atol);

  std::size_t n_states() const noexcept { return n_; }
  double t_max() const noexcept { return sol_->t_end(); }
  void eval(double t, std::span<double> out) const { sol_->eval(t, out, 0); }
  std::vector<double> operator()(double t) const;
  const std::vector<double>& mesh() const noexcept { return sol_->mesh(); }
  const ode::Stats& stats() const noexcept { return sol_->stats(); }
  double rtol() const noexcept { return rtol_; }
  double atol() const noexcept { return atol_; }

 private:
  std::shared_ptr<const ode::DenseSolution> sol_;
  std::size_t n_ = 0;
  double rtol_ = 0.0;
  double atol_ = 0.0;
};

/// Integrates dx/dt = F(x) from the model's initial densities.
FluidTrajectory solve_fluid(const PopulationModel& m, double t_max, const FluidOptions& opts = {});
/// Same from an arbitrary start point and time.
FluidTrajectory solve_fluid(const PopulationModel& m, std::vector<double> x0, double t0, double t1,
                            const FluidOptions& opts = {});

struct SteadyStateOptions {
  double tolerance = 1e-9;  ///< on ||F(x)||_inf
  double window = 10.0;     ///< time the tolerance must hold for
  double t_limit = 1e6;
  /// Tighter than the transient defaults: near equilibrium the explicit
  /// integrator runs at its stability limit and its noise floor must stay
  /// well below `tolerance`.
  FluidOptions fluid{1e-11, 1e-14};
};

struct SteadyState {
  std::vector<double> x_star;
  double residual = 0.0;
  std::string method;  ///< "integrate-to-equilibrium" or "damped-newton"
  /// Start of the window over which ||F|| stayed below tolerance.
  double t_relax = 0.0;
  std::string assumption = "equilibrium assumed globally attracting";
};

/// Forward integration to equilibrium followed by a damped Newton polish on
/// the simplex. Throws NoConvergence after t_limit.
SteadyState steady_state(const PopulationModel& m, const SteadyStateOptions& opts = {});

/// Limit single-agent generator Q(x) assembled from per-rule shares g.
///
/// The share of a rule i -> j is, in order of preference: the declared
/// `percap` expression, the rate with one x_i factor removed symbolically,
/// or f(x) / max(x_i, 1e-9).
class AgentGenerator {
 public:
  struct Entry {
    std::size_t transition;
    std::size_t from;
    std::size_t to;
    CompiledExpr share;
    bool guarded = false;  ///< share uses the epsilon-guarded quotient
  };

  explicit AgentGenerator(const PopulationModel& m);

  std::size_t n_states() const noexcept { return n_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::vector<bool>& absorbing() const noexcept { return absorbing_; }
  const std::string& transition_name(std::size_t tau) const { return rates_->name(tau); }

  /// Share g of each entry at x (checked, evaluated at max(x, 0)).
  void shares(std::span<const double> x, std::span<double> out) const;
  /// Dense Q(x).
  void evaluate(std::span<const double> x, Matrix& q) const;
  Matrix operator()(std::span<const double> x) const;

  /// Copy with the rows of the given states removed (made absorbing).
  AgentGenerator with_absorbing(const std::vector<bool>& absorb) const;

 private:
  double share_value(const Entry& e, std::span<const double> x) const;

  std::size_t n_ = 0;
  std::shared_ptr<const RateFunctions> rates_;
  std::vector<Entry> entries_;
  std::vector<bool> absorbing_;
};

inline constexpr double kShareEpsilon = 1e-9;

/// Rows of `absorb` states zeroed.
AgentGenerator absorbing_modification(const AgentGenerator& gen, const std::vector<bool>& absorb);

}  // namespace fluidmc
