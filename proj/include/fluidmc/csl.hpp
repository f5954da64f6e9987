#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fluidmc/fluid.hpp"
#include "fluidmc/formula.hpp"
#include "fluidmc/kolmogorov.hpp"
#include "fluidmc/model.hpp"
#include "fluidmc/ode.hpp"

namespace fluidmc {

/// Transient distribution of the agent, P(0) = p0, over [0, T].
TransientSolution transient(const PopulationModel& m, std::span<const double> p0, double T,
                            const FluidOptions& opts = {});
TransientSolution transient(const PopulationModel& m, std::size_t s, double T, const FluidOptions& opts = {});

std::vector<double> unit_vector(std::size_t n, std::size_t s);

/// Pi(t, t + T) as a function of the initial time t on a window [ta, tb].
///
/// Pi is propagated in t with the combined forward/backward equation
///   dPi/dt = Pi Q(t + T) - Q(t) Pi.
/// That equation amplifies perturbations like exp(rho t), rho the largest
/// exit rate, so the window is cut into pieces of length ln(100) / rho and
/// each piece starts from a forward Kolmogorov solve of Pi(t_k, t_k + T).
class ReachSignal {
 public:
  struct Piece {
    double a;
    double b;
    ode::DenseSolution sol;
  };

  ReachSignal() = default;
  ReachSignal(std::vector<Piece> pieces, std::size_t n, double T);

  std::size_t n_states() const noexcept { return n_; }
  double horizon() const noexcept { return T_; }
  double t_begin() const { return pieces_.front().a; }
  double t_end() const { return pieces_.back().b; }
  std::size_t pieces() const noexcept { return pieces_.size(); }

  Matrix operator()(double t) const;
  /// sum over `set` of Pi(t, t + T)(s, .).
  double mass(double t, std::size_t s, const std::vector<bool>& set) const;
  /// Step points of every piece, sorted and deduplicated.
  std::vector<double> mesh() const;

 private:
  const Piece& locate(double t) const;
  std::vector<Piece> pieces_;
  std::size_t n_ = 0;
  double T_ = 0.0;
};

/// Reach signal of the generator with goal and unsafe states absorbing
/// (goal takes priority on overlap), for initial times in [0, t_win].
ReachSignal reach_signal(const PopulationModel& m, const std::vector<bool>& goal, const std::vector<bool>& unsafe,
                         double T, double t_win, const FluidOptions& opts = {});
/// Lower-level form on an existing trajectory and (already absorbing) generator.
ReachSignal reach_signal(const FluidTrajectory& traj, const AgentGenerator& gen, double T, double ta, double tb,
                         const FluidOptions& opts = {});

/// Probability of a non-nested path formula from state s at time t0.
double check_path_probability(const PopulationModel& m, const PathFormula& path, std::size_t s, double t0,
                              const FluidOptions& opts = {});

/// Path probability as a function of the initial time on [0, t_win].
class ProbabilityFunction {
 public:
  ProbabilityFunction(std::function<double(double)> f, std::vector<double> mesh)
      : f_(std::move(f)), mesh_(std::move(mesh)) {}
  double operator()(double t) const { return f_(t); }
  const std::vector<double>& mesh() const noexcept { return mesh_; }

 private:
  std::function<double(double)> f_;
  std::vector<double> mesh_;
};

ProbabilityFunction path_probability_function(const PopulationModel& m, const PathFormula& path, std::size_t s,
                                              double t_win, const FluidOptions& opts = {});

/// p0-weighted average of the per-state functions.
ProbabilityFunction path_probability_function(const PopulationModel& m, const PathFormula& path,
                                              std::span<const double> p0, double t_win,
                                              const FluidOptions& opts = {});

/// Piecewise-constant truth of `value(t) cmp p` on [t_begin, t_end].
struct BooleanSignal {
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<double> crossings;      ///< strictly increasing
  std::vector<bool> truth;            ///< crossings.size() + 1 intervals
  std::vector<double> indeterminate;  ///< tangential near-crossings

  bool value_at(double t) const;
  bool constant() const noexcept { return crossings.empty(); }
};

inline constexpr double kCrossingResolution = 1e-9;

BooleanSignal boolean_signal(const ProbabilityFunction& f, const Bound& bound, double t_begin, double t_end);
/// Signal of a top-level P formula for initial state s.
BooleanSignal boolean_signal(const PopulationModel& m, const Formula& prob, std::size_t s, double t_win,
                             const FluidOptions& opts = {});

}  // namespace fluidmc
