#include "fluidmc/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fluidmc/error.hpp"

namespace fluidmc {

namespace {

// Rates are only defined on the simplex; integrator stages may leave it by
// roundoff-sized amounts.
std::span<const double> nonnegative(std::span<const double> x, std::vector<double>& buf) {
  if (std::none_of(x.begin(), x.end(), [](double v) { return v < 0.0; })) return x;
  buf.assign(x.begin(), x.end());
  for (double& v : buf) v = std::max(v, 0.0);
  return buf;
}

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

}  // namespace

Drift::Drift(const PopulationModel& m) : n_(m.n_states()), rates_(m) {
  changes_.resize(rates_.size());
  for (std::size_t tau = 0; tau < rates_.size(); ++tau) {
    const auto& v = rates_.update(tau);
    for (std::size_t i = 0; i < n_; ++i)
      if (v[i] != 0) changes_[tau].push_back({i, static_cast<double>(v[i])});
  }
}

void Drift::operator()(std::span<const double> x, std::span<double> out) const {
  thread_local std::vector<double> buf;
  const auto xc = nonnegative(x, buf);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t tau = 0; tau < changes_.size(); ++tau) {
    if (changes_[tau].empty()) continue;
    const double f = rates_.rate(tau, xc);
    if (f == 0.0) continue;
    for (const auto& c : changes_[tau]) out[c.state] += c.delta * f;
  }
}

std::vector<double> drift(const PopulationModel& m, std::span<const double> x) {
  std::vector<double> out(m.n_states());
  const Drift f(m);
  f(x, out);
  return out;
}

bool project_simplex(std::span<double> x) {
  double sum = 0.0;
  double low = 0.0;
  for (double v : x) {
    sum += v;
    low = std::min(low, v);
  }
  if (low >= -1e-12 && std::abs(sum - 1.0) <= 1e-12) return false;
  sum = 0.0;
  for (double& v : x) {
    v = std::max(v, 0.0);
    sum += v;
  }
  if (sum > 0.0)
    for (double& v : x) v /= sum;
  return true;
}

FluidTrajectory::FluidTrajectory(std::shared_ptr<const ode::DenseSolution> sol, std::size_t n_states, double rtol,
                                 double atol)
    : sol_(std::move(sol)), n_(n_states), rtol_(rtol), atol_(atol) {}

std::vector<double> FluidTrajectory::operator()(double t) const {
  std::vector<double> out(n_);
  eval(t, out);
  return out;
}

FluidTrajectory solve_fluid(const PopulationModel& m, double t_max, const FluidOptions& opts) {
  return solve_fluid(m, m.init_density, 0.0, t_max, opts);
}

FluidTrajectory solve_fluid(const PopulationModel& m, std::vector<double> x0, double t0, double t1,
                            const FluidOptions& opts) {
  if (!(t1 >= t0)) throw InputError("fluid horizon must satisfy t1 >= t0");
  const Drift f(m);
  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;
  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) { f(y, dy); };
  auto hook = [](double, std::span<double> y) {
    return project_simplex(y) ? ode::StepAction::Modified : ode::StepAction::Continue;
  };
  auto sol = std::make_shared<ode::DenseSolution>(ode::integrate(rhs, t0, t1, std::move(x0), o, hook));
  return FluidTrajectory(std::move(sol), m.n_states(), opts.rtol, opts.atol);
}

namespace {

// Damped Newton on F restricted to the simplex: the last coordinate is
// eliminated through sum(x) = 1 and the last drift equation is dropped.
bool newton_polish(const Drift& f, std::vector<double>& x, double& residual) {
  const std::size_t n = x.size();
  if (n < 2) return false;
  const std::size_t r = n - 1;
  std::vector<double> fx(n), xp(n), fp(n), fm(n);
  auto eval = [&](const std::vector<double>& at, std::vector<double>& out) {
    f(at, out);
    return sup_norm(out);
  };
  double res = eval(x, fx);
  bool improved = false;
  for (int iter = 0; iter < 30 && res > 1e-15; ++iter) {
    Eigen::MatrixXd jac(r, r);
    for (std::size_t k = 0; k < r; ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[k]));
      xp = x;
      xp[k] += h;
      xp[n - 1] -= h;
      f(xp, fp);
      xp = x;
      xp[k] -= h;
      xp[n - 1] += h;
      f(xp, fm);
      for (std::size_t i = 0; i < r; ++i) jac(i, k) = (fp[i] - fm[i]) / (2 * h);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (lu.rank() < static_cast<Eigen::Index>(r)) break;
    Eigen::VectorXd rhs(r);
    for (std::size_t i = 0; i < r; ++i) rhs[i] = fx[i];
    const Eigen::VectorXd delta = lu.solve(rhs);
    double lambda = 1.0;
    bool accepted = false;
    while (lambda >= 1.0 / 1024) {
      double last = 1.0;
      for (std::size_t k = 0; k < r; ++k) {
        xp[k] = x[k] - lambda * delta[k];
        last -= xp[k];
      }
      xp[n - 1] = last;
      const bool inside = std::all_of(xp.begin(), xp.end(), [](double v) { return v >= -1e-12; });
      if (inside) {
        const double rp = eval(xp, fp);
        if (rp < res) {
          x = xp;
          fx = fp;
          res = rp;
          accepted = true;
          improved = true;
          break;
        }
      }
      lambda /= 2;
    }
    if (!accepted) break;
  }
  residual = res;
  return improved;
}

}  // namespace

SteadyState steady_state(const PopulationModel& m, const SteadyStateOptions& opts) {
  const Drift f(m);
  const std::size_t n = m.n_states();
  std::vector<double> x = m.init_density;
  std::vector<double> fx(n);
  f(x, fx);

  double below_since = sup_norm(fx) < opts.tolerance ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  double t = 0.0;
  bool done = false;
  ode::Options o;
  o.rtol = opts.fluid.rtol;
  o.atol = opts.fluid.atol;
  o.max_step = opts.window / 2;
  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) { f(y, dy); };
  auto hook = [&](double tt, std::span<double> y) {
    const bool projected = project_simplex(y);
    f(y, fx);
    if (sup_norm(fx) < opts.tolerance) {
      if (std::isnan(below_since)) below_since = tt;
      if (tt - below_since >= opts.window) {
        done = true;
        return ode::StepAction::Stop;
      }
    } else {
      below_since = std::numeric_limits<double>::quiet_NaN();
    }
    return projected ? ode::StepAction::Modified : ode::StepAction::Continue;
  };

  constexpr double chunk = 1000.0;
  while (!done && t < opts.t_limit) {
    const double t1 = std::min(t + chunk, opts.t_limit);
    auto sol = ode::integrate(rhs, t, t1, x, o, hook);
    x = sol.final_state();
    t = sol.t_end();
    if (!done && std::isnan(below_since) == false && t - below_since >= opts.window) done = true;
  }
  f(x, fx);
  if (!done) throw NoConvergence(opts.t_limit, sup_norm(fx));

  SteadyState out;
  out.t_relax = below_since;
  out.method = "integrate-to-equilibrium";
  out.residual = sup_norm(fx);
  std::vector<double> polished = x;
  double res = out.residual;
  if (newton_polish(f, polished, res) && res < out.residual) {
    x = polished;
    out.residual = res;
    out.method = "damped-newton";
  }
  out.x_star = std::move(x);
  return out;
}

AgentGenerator::AgentGenerator(const PopulationModel& m)
    : n_(m.n_states()), rates_(std::make_shared<RateFunctions>(m)), absorbing_(m.n_states(), false) {
  for (std::size_t tau = 0; tau < m.transitions.size(); ++tau) {
    const Transition& t = m.transitions[tau];
    for (const Rule& r : t.rules) {
      if (r.multiplicity != 1) throw MultiplicityUnsupported(t.name);
      Entry e{tau, r.from, r.to, {}, false};
      if (r.percap) {
        e.share = CompiledExpr(*r.percap, m.param_values, m.def_bodies);
      } else if (auto g = divide_by_density(t.rate, r.from, m.def_bodies)) {
        e.share = CompiledExpr(*g, m.param_values, m.def_bodies);
      } else {
        e.guarded = true;
      }
      entries_.push_back(std::move(e));
    }
  }
}

double AgentGenerator::share_value(const Entry& e, std::span<const double> x) const {
  if (e.guarded) return rates_->rate(e.transition, x) / std::max(x[e.from], kShareEpsilon);
  return checked_rate(e.share(x), rates_->name(e.transition), x);
}

void AgentGenerator::shares(std::span<const double> x, std::span<double> out) const {
  thread_local std::vector<double> buf;
  const auto xc = nonnegative(x, buf);
  for (std::size_t k = 0; k < entries_.size(); ++k) out[k] = share_value(entries_[k], xc);
}

void AgentGenerator::evaluate(std::span<const double> x, Matrix& q) const {
  thread_local std::vector<double> buf;
  const auto xc = nonnegative(x, buf);
  q.setZero(n_, n_);
  for (const Entry& e : entries_) {
    const double g = share_value(e, xc);
    q(e.from, e.to) += g;
    q(e.from, e.from) -= g;
  }
}

Matrix AgentGenerator::operator()(std::span<const double> x) const {
  Matrix q;
  evaluate(x, q);
  return q;
}

AgentGenerator AgentGenerator::with_absorbing(const std::vector<bool>& absorb) const {
  if (absorb.size() != n_) throw InputError("absorbing set has the wrong number of states");
  AgentGenerator out = *this;
  std::erase_if(out.entries_, [&](const Entry& e) { return absorb[e.from]; });
  for (std::size_t i = 0; i < n_; ++i) out.absorbing_[i] = absorbing_[i] || absorb[i];
  return out;
}

AgentGenerator absorbing_modification(const AgentGenerator& gen, const std::vector<bool>& absorb) {
  return gen.with_absorbing(absorb);
}

}  // namespace fluidmc
