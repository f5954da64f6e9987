#include "fluidmc/csl.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "fluidmc/error.hpp"

namespace fluidmc {

std::vector<double> unit_vector(std::size_t n, std::size_t s) {
  std::vector<double> v(n, 0.0);
  v.at(s) = 1.0;
  return v;
}

TransientSolution transient(const PopulationModel& m, std::span<const double> p0, double T,
                            const FluidOptions& opts) {
  const AgentGenerator gen(m);
  Matrix p(1, m.n_states());
  if (p0.size() != m.n_states()) throw InputError("initial distribution has the wrong number of states");
  for (std::size_t i = 0; i < p0.size(); ++i) p(0, i) = p0[i];
  return solve_transient(m, gen, p, T, nullptr, opts);
}

TransientSolution transient(const PopulationModel& m, std::size_t s, double T, const FluidOptions& opts) {
  return transient(m, unit_vector(m.n_states(), s), T, opts);
}

ReachSignal::ReachSignal(std::vector<Piece> pieces, std::size_t n, double T)
    : pieces_(std::move(pieces)), n_(n), T_(T) {}

const ReachSignal::Piece& ReachSignal::locate(double t) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t, [](double v, const Piece& p) { return v < p.a; });
  if (it != pieces_.begin()) --it;
  return *it;
}

Matrix ReachSignal::operator()(double t) const {
  const Piece& p = locate(t);
  std::vector<double> buf(n_ * n_);
  p.sol.eval(std::clamp(t, p.a, p.b), buf);
  return unflatten(buf, n_, n_);
}

double ReachSignal::mass(double t, std::size_t s, const std::vector<bool>& set) const {
  const Piece& p = locate(t);
  std::vector<double> row(n_);
  p.sol.eval(std::clamp(t, p.a, p.b), row, s * n_);
  double v = 0.0;
  for (std::size_t j = 0; j < n_; ++j)
    if (set[j]) v += row[j];
  return v;
}

std::vector<double> ReachSignal::mesh() const {
  std::vector<double> out;
  for (const auto& p : pieces_) {
    out.push_back(p.a);
    for (double t : p.sol.mesh()) out.push_back(t);
    out.push_back(p.b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

Matrix identity(std::size_t n) { return Matrix::Identity(n, n); }

double max_exit_rate(const FluidTrajectory& traj, const AgentGenerator& gen, double ta, double tb) {
  Matrix q;
  double rho = 0.0;
  std::vector<double> x(traj.n_states());
  auto visit = [&](double t) {
    traj.eval(t, x);
    gen.evaluate(x, q);
    for (Eigen::Index i = 0; i < q.rows(); ++i) rho = std::max(rho, -q(i, i));
  };
  visit(ta);
  for (double t : traj.mesh())
    if (t > ta && t < tb) visit(t);
  visit(tb);
  return rho;
}

}  // namespace

ReachSignal reach_signal(const FluidTrajectory& traj, const AgentGenerator& gen, double T, double ta, double tb,
                         const FluidOptions& opts) {
  if (!(T >= 0.0) || !(tb >= ta) || ta < 0.0) throw InputError("reach signal needs T >= 0 and 0 <= ta <= tb");
  const std::size_t n = gen.n_states();
  const double rho = max_exit_rate(traj, gen, ta, tb + T);
  const double piece_len = rho > 0.0 ? std::log(100.0) / rho : std::numeric_limits<double>::infinity();
  const auto count =
      tb > ta ? static_cast<std::size_t>(std::max(1.0, std::ceil((tb - ta) / piece_len))) : std::size_t{1};

  std::vector<double> x1(n), x2(n);
  Matrix q1, q2;
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    traj.eval(std::min(t, traj.t_max()), x1);
    traj.eval(std::min(t + T, traj.t_max()), x2);
    gen.evaluate(x1, q1);
    gen.evaluate(x2, q2);
    Eigen::Map<const Matrix> pi(y.data(), n, n);
    Eigen::Map<Matrix> d(dy.data(), n, n);
    d.noalias() = pi * q2;
    d.noalias() -= q1 * pi;
  };
  auto hook = [&](double, std::span<double> y) {
    return normalize_rows(y, n) ? ode::StepAction::Modified : ode::StepAction::Continue;
  };
  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;

  std::vector<ReachSignal::Piece> pieces;
  for (std::size_t k = 0; k < count; ++k) {
    const double a = ta + (tb - ta) * static_cast<double>(k) / static_cast<double>(count);
    const double b = k + 1 == count ? tb : ta + (tb - ta) * static_cast<double>(k + 1) / static_cast<double>(count);
    std::vector<double> y0;
    if (T > 0.0) {
      auto fwd = propagate(traj, gen, identity(n), a, a + T, opts);
      y0 = fwd.final_state();
    } else {
      const Matrix id = identity(n);
      y0.assign(id.data(), id.data() + n * n);
    }
    pieces.push_back({a, b, ode::integrate(rhs, a, b, std::move(y0), o, hook)});
  }
  return ReachSignal(std::move(pieces), n, T);
}

ReachSignal reach_signal(const PopulationModel& m, const std::vector<bool>& goal, const std::vector<bool>& unsafe,
                         double T, double t_win, const FluidOptions& opts) {
  const std::size_t n = m.n_states();
  if (goal.size() != n || unsafe.size() != n) throw InputError("state sets have the wrong number of states");
  std::vector<bool> absorb(n);
  for (std::size_t i = 0; i < n; ++i) absorb[i] = goal[i] || unsafe[i];
  const AgentGenerator gen = AgentGenerator(m).with_absorbing(absorb);
  const auto traj = solve_fluid(m, t_win + T, opts);
  return reach_signal(traj, gen, T, 0.0, t_win, opts);
}

namespace {

struct PathSets {
  std::vector<bool> phi1;
  std::vector<bool> goal;
  std::vector<bool> not_phi1;
  std::vector<bool> absorb;  ///< goal or not phi1
};

PathSets path_sets(const PathFormula& path, std::size_t n) {
  PathSets s;
  s.goal = satisfaction_set(*path.right, n);
  s.phi1 = path.kind == PathFormula::Kind::Until ? satisfaction_set(*path.left, n) : std::vector<bool>(n, true);
  s.not_phi1 = s.phi1;
  s.not_phi1.flip();
  s.absorb.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.absorb[i] = s.goal[i] || s.not_phi1[i];
  return s;
}

double goal_mass(std::span<const double> row, const std::vector<bool>& goal) {
  double v = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j)
    if (goal[j]) v += row[j];
  return v;
}

double until_probability(const FluidTrajectory& traj, const AgentGenerator& gen, const PathSets& sets,
                         std::size_t s, double t0, double t1, double t2, const FluidOptions& opts) {
  const std::size_t n = gen.n_states();
  const AgentGenerator reach = gen.with_absorbing(sets.absorb);
  Matrix start(1, n);
  start.setZero();
  start(0, s) = 1.0;
  if (t1 == 0.0) {
    const auto sol = propagate(traj, reach, start, t0, t0 + t2, opts);
    return std::clamp(goal_mass(sol.final_state(), sets.goal), 0.0, 1.0);
  }
  // Phase 1 keeps the agent inside phi1 until t0 + T1; phase 2 is the
  // [0, T2 - T1] problem from every phi1 state.
  const auto phase1 = propagate(traj, gen.with_absorbing(sets.not_phi1), start, t0, t0 + t1, opts);
  const auto phase2 = propagate(traj, reach, identity(n), t0 + t1, t0 + t2, opts);
  const auto& p1 = phase1.final_state();
  const auto& p2 = phase2.final_state();
  double v = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!sets.phi1[j] || p1[j] == 0.0) continue;
    v += p1[j] * goal_mass(std::span<const double>(p2).subspan(j * n, n), sets.goal);
  }
  return std::clamp(v, 0.0, 1.0);
}

double next_probability(const FluidTrajectory& traj, const AgentGenerator& gen, const std::vector<bool>& target,
                        std::size_t s, double t0, double t1, double t2, const FluidOptions& opts) {
  if (t2 <= t1) return 0.0;
  const std::size_t n = gen.n_states();
  std::vector<double> x(n);
  Matrix q;
  bool active = false;
  // y = (probability of no jump yet, probability of a first jump into target
  // inside the window).
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    traj.eval(std::min(t, traj.t_max()), x);
    gen.evaluate(x, q);
    dy[0] = q(s, s) * y[0];
    double into = 0.0;
    if (active)
      for (std::size_t j = 0; j < n; ++j)
        if (j != s && target[j]) into += q(s, j);
    dy[1] = y[0] * into;
  };
  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;
  std::vector<double> y{1.0, 0.0};
  if (t1 > 0.0) y = ode::integrate(rhs, t0, t0 + t1, y, o).final_state();
  active = true;
  y = ode::integrate(rhs, t0 + t1, t0 + t2, y, o).final_state();
  return std::clamp(y[1], 0.0, 1.0);
}

}  // namespace

double check_path_probability(const PopulationModel& m, const PathFormula& path, std::size_t s, double t0,
                              const FluidOptions& opts) {
  const std::size_t n = m.n_states();
  if (s >= n) throw InputError("initial state out of range");
  if (!(t0 >= 0.0)) throw InputError("t0 must be >= 0");
  const PathSets sets = path_sets(path, n);
  const AgentGenerator gen(m);
  const auto traj = solve_fluid(m, t0 + path.t2, opts);
  if (path.kind == PathFormula::Kind::Next)
    return next_probability(traj, gen, sets.goal, s, t0, path.t1, path.t2, opts);
  return until_probability(traj, gen, sets, s, t0, path.t1, path.t2, opts);
}

ProbabilityFunction path_probability_function(const PopulationModel& m, const PathFormula& path, std::size_t s,
                                              double t_win, const FluidOptions& opts) {
  const std::size_t n = m.n_states();
  if (s >= n) throw InputError("initial state out of range");
  if (!(t_win >= 0.0)) throw InputError("time window must be >= 0");
  const PathSets sets = path_sets(path, n);
  const AgentGenerator gen(m);
  const auto traj = std::make_shared<FluidTrajectory>(solve_fluid(m, t_win + path.t2, opts));

  if (path.kind == PathFormula::Kind::Next) {
    std::vector<double> mesh;
    constexpr std::size_t samples = 1000;
    for (std::size_t k = 0; k <= samples; ++k) mesh.push_back(t_win * static_cast<double>(k) / samples);
    mesh.erase(std::unique(mesh.begin(), mesh.end()), mesh.end());
    auto f = [traj, gen, sets, s, path, opts](double t) {
      return next_probability(*traj, gen, sets.goal, s, t, path.t1, path.t2, opts);
    };
    return ProbabilityFunction(f, std::move(mesh));
  }

  const AgentGenerator reach = gen.with_absorbing(sets.absorb);
  if (path.t1 == 0.0) {
    auto sig = std::make_shared<ReachSignal>(reach_signal(*traj, reach, path.t2, 0.0, t_win, opts));
    auto f = [sig, goal = sets.goal, s](double t) { return std::clamp(sig->mass(t, s, goal), 0.0, 1.0); };
    return ProbabilityFunction(f, sig->mesh());
  }

  auto first = std::make_shared<ReachSignal>(
      reach_signal(*traj, gen.with_absorbing(sets.not_phi1), path.t1, 0.0, t_win, opts));
  auto second = std::make_shared<ReachSignal>(
      reach_signal(*traj, reach, path.t2 - path.t1, path.t1, path.t1 + t_win, opts));
  auto f = [first, second, sets, s, t1 = path.t1, n](double t) {
    const Matrix p1 = (*first)(t);
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (sets.phi1[j] && p1(s, j) != 0.0) v += p1(s, j) * second->mass(t + t1, j, sets.goal);
    return std::clamp(v, 0.0, 1.0);
  };
  auto mesh = first->mesh();
  for (double t : second->mesh()) mesh.push_back(std::clamp(t - path.t1, 0.0, t_win));
  std::sort(mesh.begin(), mesh.end());
  mesh.erase(std::unique(mesh.begin(), mesh.end()), mesh.end());
  return ProbabilityFunction(f, std::move(mesh));
}

bool BooleanSignal::value_at(double t) const {
  const auto k = static_cast<std::size_t>(std::upper_bound(crossings.begin(), crossings.end(), t) - crossings.begin());
  return truth[k];
}

namespace {

bool holds(double v, const Bound& b) {
  switch (b.cmp) {
    case Comparison::Less: return v < b.value;
    case Comparison::LessEqual: return v <= b.value;
    case Comparison::Greater: return v > b.value;
    case Comparison::GreaterEqual: return v >= b.value;
    case Comparison::Query: break;
  }
  return false;
}

// Shrinks [lo, hi] around the truth change to the crossing resolution.
double bisect(const ProbabilityFunction& f, const Bound& b, double lo, double hi) {
  const bool at_lo = holds(f(lo), b);
  while (hi - lo > kCrossingResolution) {
    const double mid = 0.5 * (lo + hi);
    if (holds(f(mid), b) == at_lo)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Golden-section search for the extremum of f on [a, b].
std::pair<double, double> extremum(const ProbabilityFunction& f, double a, double b, bool maximum) {
  constexpr double g = 0.6180339887498949;
  const double sign = maximum ? -1.0 : 1.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = sign * f(c), fd = sign * f(d);
  while (b - a > kCrossingResolution) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = sign * f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = sign * f(d);
    }
  }
  const double t = 0.5 * (a + b);
  return {t, f(t)};
}

}  // namespace

BooleanSignal boolean_signal(const ProbabilityFunction& f, const Bound& bound, double t_begin, double t_end) {
  if (bound.is_query()) throw InputError("a boolean signal needs a probability bound");
  BooleanSignal sig;
  sig.t_begin = t_begin;
  sig.t_end = t_end;
  const double p = bound.value;
  const bool always_true = (bound.cmp == Comparison::GreaterEqual && p <= 0.0) ||
                           (bound.cmp == Comparison::LessEqual && p >= 1.0);
  const bool always_false = (bound.cmp == Comparison::Greater && p >= 1.0) ||
                            (bound.cmp == Comparison::Less && p <= 0.0);
  if (always_true || always_false) {
    sig.truth = {always_true};
    return sig;
  }

  std::vector<double> pts{t_begin, t_end};
  for (double t : f.mesh())
    if (t >= t_begin && t <= t_end) pts.push_back(t);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t base = pts.size();
  for (std::size_t k = 0; k + 1 < base; ++k) pts.push_back(0.5 * (pts[k] + pts[k + 1]));
  std::sort(pts.begin(), pts.end());

  const std::size_t K = pts.size();
  std::vector<double> d(K);
  std::vector<bool> tr(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double v = f(pts[k]);
    d[k] = v - p;
    tr[k] = holds(v, bound);
  }

  std::vector<char> near_crossing(K, 0);
  for (std::size_t k = 0; k + 1 < K; ++k) {
    if (tr[k] == tr[k + 1]) continue;
    sig.crossings.push_back(bisect(f, bound, pts[k], pts[k + 1]));
    near_crossing[k] = near_crossing[k + 1] = 1;
  }
  for (std::size_t k = 1; k + 1 < K; ++k) {
    if (tr[k - 1] != tr[k] || tr[k] != tr[k + 1]) continue;
    const double left = d[k] - d[k - 1], right = d[k + 1] - d[k];
    if (!(left * right < 0.0)) continue;
    const auto [t_star, v_star] = extremum(f, pts[k - 1], pts[k + 1], left > 0.0);
    if (holds(v_star, bound) != tr[k]) {
      sig.crossings.push_back(bisect(f, bound, pts[k - 1], t_star));
      sig.crossings.push_back(bisect(f, bound, t_star, pts[k + 1]));
    } else if (std::abs(v_star - p) < kDecisionMargin) {
      sig.indeterminate.push_back(t_star);
    }
    near_crossing[k] = 1;
    ++k;
  }
  for (std::size_t k = 0; k < K; ++k)
    if (!near_crossing[k] && std::abs(d[k]) < kDecisionMargin) sig.indeterminate.push_back(pts[k]);

  std::sort(sig.crossings.begin(), sig.crossings.end());
  std::sort(sig.indeterminate.begin(), sig.indeterminate.end());
  sig.indeterminate.erase(std::unique(sig.indeterminate.begin(), sig.indeterminate.end(),
                                      [](double a, double b) { return b - a < kCrossingResolution; }),
                          sig.indeterminate.end());
  sig.truth.push_back(tr[0]);
  for (std::size_t k = 0; k < sig.crossings.size(); ++k) sig.truth.push_back(!sig.truth.back());
  return sig;
}

ProbabilityFunction path_probability_function(const PopulationModel& m, const PathFormula& path,
                                              std::span<const double> p0, double t_win, const FluidOptions& opts) {
  if (p0.size() != m.n_states()) throw InputError("initial distribution has the wrong number of states");
  std::vector<std::pair<double, ProbabilityFunction>> parts;
  std::vector<double> mesh;
  for (std::size_t s = 0; s < p0.size(); ++s) {
    if (p0[s] <= 0.0) continue;
    parts.emplace_back(p0[s], path_probability_function(m, path, s, t_win, opts));
    const auto& ms = parts.back().second.mesh();
    mesh.insert(mesh.end(), ms.begin(), ms.end());
  }
  if (parts.size() == 1 && parts.front().first == 1.0) return parts.front().second;
  std::sort(mesh.begin(), mesh.end());
  mesh.erase(std::unique(mesh.begin(), mesh.end()), mesh.end());
  return ProbabilityFunction(
      [parts = std::move(parts)](double t) {
        double v = 0.0;
        for (const auto& [w, f] : parts) v += w * f(t);
        return v;
      },
      std::move(mesh));
}

BooleanSignal boolean_signal(const PopulationModel& m, const Formula& prob, std::size_t s, double t_win,
                             const FluidOptions& opts) {
  if (prob.kind != Formula::Kind::Prob) throw InputError("boolean signals are defined for P formulas");
  const auto f = path_probability_function(m, prob.path, s, t_win, opts);
  return boolean_signal(f, prob.bound, 0.0, t_win);
}

}  // namespace fluidmc
