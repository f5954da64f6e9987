#include "fluidmc/kolmogorov.hpp"

#include <algorithm>
#include <cmath>

#include "fluidmc/error.hpp"

namespace fluidmc {

bool normalize_rows(std::span<double> p, std::size_t n) {
  bool changed = false;
  for (std::size_t off = 0; off + n <= p.size(); off += n)
    changed |= project_simplex(p.subspan(off, n));
  return changed;
}

Matrix unflatten(std::span<const double> y, std::size_t rows, std::size_t n) {
  Matrix out(rows, n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = y[r * n + c];
  return out;
}

TransientSolution::TransientSolution(std::shared_ptr<const ode::DenseSolution> sol, std::size_t n, std::size_t rows,
                                     bool reward, double rtol, double atol)
    : sol_(std::move(sol)), n_(n), rows_(rows), reward_(reward), rtol_(rtol), atol_(atol) {}

std::vector<double> TransientSolution::x(double t) const {
  std::vector<double> out(n_);
  sol_->eval(t, out, 0);
  return out;
}

Matrix TransientSolution::P(double t) const {
  std::vector<double> buf(rows_ * n_);
  sol_->eval(t, buf, n_);
  return unflatten(buf, rows_, n_);
}

std::vector<double> TransientSolution::row(double t, std::size_t r) const {
  std::vector<double> out(n_);
  sol_->eval(t, out, n_ + r * n_);
  return out;
}

double TransientSolution::reward(double t, std::size_t r) const {
  if (!reward_) return 0.0;
  double v = 0.0;
  sol_->eval(t, std::span<double>(&v, 1), n_ + rows_ * n_ + r);
  return v;
}

Matrix TransientSolution::final_P() const {
  const auto& y = sol_->final_state();
  return unflatten(std::span<const double>(y).subspan(n_, rows_ * n_), rows_, n_);
}

double TransientSolution::final_reward(std::size_t r) const {
  return reward_ ? sol_->final_state()[n_ + rows_ * n_ + r] : 0.0;
}

namespace {

// dP = P Q and the reward rate w(s) = rho_s(s) + sum over generator entries
// out of s of rho_t(alpha) g_alpha.
struct KolmogorovRhs {
  const AgentGenerator& gen;
  const RewardRates* reward;
  std::size_t n;
  std::size_t rows;
  Matrix q;
  std::vector<double> shares;
  std::vector<double> w;

  KolmogorovRhs(const AgentGenerator& g, const RewardRates* rw, std::size_t rows_)
      : gen(g), reward(rw), n(g.n_states()), rows(rows_), shares(g.entries().size()), w(g.n_states()) {
    q.setZero(n, n);
  }

  void operator()(std::span<const double> x, std::span<const double> p, std::span<double> dp,
                  std::span<double> dr) {
    gen.shares(x, shares);
    q.setZero();
    const auto& entries = gen.entries();
    for (std::size_t k = 0; k < entries.size(); ++k) {
      q(entries[k].from, entries[k].to) += shares[k];
      q(entries[k].from, entries[k].from) -= shares[k];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double* pr = p.data() + r * n;
      double* out = dp.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += pr[i] * q(i, j);
        out[j] = acc;
      }
    }
    if (!reward) return;
    for (std::size_t s = 0; s < n; ++s) w[s] = reward->state[s];
    for (std::size_t k = 0; k < entries.size(); ++k)
      w[entries[k].from] += reward->transition[entries[k].transition] * shares[k];
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) acc += p[r * n + s] * w[s];
      dr[r] = acc;
    }
  }
};

void check_p0(const Matrix& p0, std::size_t n) {
  if (static_cast<std::size_t>(p0.cols()) != n || p0.rows() < 1)
    throw InputError("initial distribution has the wrong number of states");
  for (Eigen::Index r = 0; r < p0.rows(); ++r) {
    if (std::abs(p0.row(r).sum() - 1.0) > 1e-9 || p0.row(r).minCoeff() < 0.0)
      throw InputError("initial distribution rows must be probability vectors");
  }
}

}  // namespace

TransientSolution solve_transient(const PopulationModel& m, const AgentGenerator& gen, const Matrix& p0, double T,
                                  const RewardRates* reward, const FluidOptions& opts) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw InputError("time bound must be finite and >= 0");
  const std::size_t n = m.n_states();
  check_p0(p0, n);
  if (reward && (reward->state.size() != n || reward->transition.size() != m.transitions.size()))
    throw InputError("reward structure does not match the model");
  const std::size_t rows = static_cast<std::size_t>(p0.rows());
  const std::size_t block = n + rows * n;
  const std::size_t dim = block + (reward ? rows : 0);

  std::vector<double> y0(dim, 0.0);
  std::copy(m.init_density.begin(), m.init_density.end(), y0.begin());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) y0[n + r * n + c] = p0(r, c);

  const Drift drift(m);
  KolmogorovRhs k(gen, reward, rows);
  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
    drift(y.first(n), dy.first(n));
    k(y.first(n), y.subspan(n, rows * n), dy.subspan(n, rows * n), dy.subspan(block));
  };
  auto hook = [&](double, std::span<double> y) {
    bool changed = project_simplex(y.first(n));
    changed |= normalize_rows(y.subspan(n, rows * n), n);
    return changed ? ode::StepAction::Modified : ode::StepAction::Continue;
  };
  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;
  o.control_dim = block;
  auto sol = std::make_shared<ode::DenseSolution>(ode::integrate(rhs, 0.0, T, std::move(y0), o, hook));
  return TransientSolution(std::move(sol), n, rows, reward != nullptr, opts.rtol, opts.atol);
}

ode::DenseSolution propagate(const FluidTrajectory& traj, const AgentGenerator& gen, const Matrix& p0, double ta,
                             double tb, const FluidOptions& opts) {
  const std::size_t n = gen.n_states();
  check_p0(p0, n);
  if (tb > traj.t_max() * (1 + 1e-12) + 1e-12) throw InputError("propagation beyond the fluid horizon");
  const std::size_t rows = static_cast<std::size_t>(p0.rows());
  std::vector<double> y0(rows * n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) y0[r * n + c] = p0(r, c);
  KolmogorovRhs k(gen, nullptr, rows);
  std::vector<double> x(n);
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    traj.eval(std::min(t, traj.t_max()), x);
    k(x, y, dy, {});
  };
  auto hook = [&](double, std::span<double> y) {
    return normalize_rows(y, n) ? ode::StepAction::Modified : ode::StepAction::Continue;
  };
  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;
  return ode::integrate(rhs, ta, tb, std::move(y0), o, hook);
}

}  // namespace fluidmc
