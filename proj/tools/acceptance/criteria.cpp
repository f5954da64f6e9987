#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "acceptance.hpp"
#include "fluidmc/collective.hpp"
#include "fluidmc/csl.hpp"
#include "fluidmc/error.hpp"
#include "fluidmc/parser.hpp"
#include "fluidmc/reward.hpp"
#include "fluidmc/sim.hpp"

namespace fluidmc::acceptance {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------ criterion 1

struct StateAgreement {
  int N = 0;
  std::vector<double> sup;       ///< per state
  std::vector<double> inside;    ///< per state fraction of grid points in the CI
  std::vector<double> sup_hw;    ///< CI half-width where the sup is attained
  double fluid_seconds = 0.0;
  double stat_seconds = 0.0;

  double worst() const { return *std::max_element(sup.begin(), sup.end()); }
  double worst_hw() const {
    return sup_hw[static_cast<std::size_t>(std::max_element(sup.begin(), sup.end()) - sup.begin())];
  }
};

StateAgreement state_agreement(const PopulationModel& m, int N, std::uint64_t seed) {
  constexpr double T = 60.0;
  constexpr std::size_t runs = 5000;
  const std::size_t a = m.state_index("a");
  const auto grid = uniform_grid(T, 1.0);
  StateAgreement out;
  out.N = N;

  auto t0 = Clock::now();
  const auto sol = transient(m, a, T);
  std::vector<std::vector<double>> fluid;
  for (double t : grid) fluid.push_back(sol.row(t, 0));
  out.fluid_seconds = seconds_since(t0);

  SimConfig cfg;
  cfg.N = N;
  cfg.t_max = T;
  cfg.runs = runs;
  cfg.seed = seed;
  cfg.grid = grid;
  cfg.tag_initial_state = "a";
  const auto est = estimate_state_probs(m, cfg);
  out.stat_seconds = est.seconds;

  const std::size_t n = m.n_states();
  out.sup.assign(n, 0.0);
  out.inside.assign(n, 0.0);
  out.sup_hw.assign(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t in = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto r = static_cast<Eigen::Index>(g), c = static_cast<Eigen::Index>(s);
      const double e = std::abs(fluid[g][s] - est.mean(r, c));
      if (e > out.sup[s]) {
        out.sup[s] = e;
        out.sup_hw[s] = est.half_width(r, c);
      }
      if (e <= est.half_width(r, c)) ++in;
    }
    out.inside[s] = static_cast<double>(in) / static_cast<double>(grid.size());
  }
  return out;
}

Outcome criterion1(const PopulationModel& m, const StateAgreement& r) {
  Outcome o{"1", "fast-simulation agreement (bike, N=300, 5000 runs, t in 0..60)", true, "", 0.0};
  std::ostringstream d;
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    const bool ok = r.sup[s] <= 0.05 && r.inside[s] >= 0.9;
    o.pass &= ok;
    d << m.agent.name(s) << ": sup " << fmt("%.4f", r.sup[s]) << ", in CI " << fmt("%.0f%%", 100 * r.inside[s])
      << (ok ? "" : " FAIL") << "; ";
  }
  o.pass &= r.fluid_seconds < 5.0;
  d << fmt("fluid %.3fs, simulation %.1fs", r.fluid_seconds, r.stat_seconds);
  o.detail = d.str();
  return o;
}

// ------------------------------------------------------------ criterion 2

struct RewardTable {
  int N = 0;
  std::vector<double> grid;
  // Phi1 cost C, Phi2 diss I, Phi3 cost F at_d, plus cumulative diss.
  std::vector<std::vector<double>> fluid;
  std::vector<double> fluid_seconds;
  EnsembleEstimate est;

  double gap(std::size_t k) const {
    const auto last = static_cast<Eigen::Index>(grid.size() - 1);
    return std::abs(fluid[k].back() - est.mean(last, static_cast<Eigen::Index>(k)));
  }
  double stat(std::size_t k) const {
    return est.mean(static_cast<Eigen::Index>(grid.size() - 1), static_cast<Eigen::Index>(k));
  }
  double hw(std::size_t k) const {
    return est.half_width(static_cast<Eigen::Index>(grid.size() - 1), static_cast<Eigen::Index>(k));
  }
  double rel(std::size_t k) const { return relative_error(fluid[k].back(), stat(k)); }
  double max_err(std::size_t k) const {
    double v = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
      v = std::max(v, std::abs(fluid[k][g] - est.mean(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(k))));
    return v;
  }
  double mean_err(std::size_t k) const {
    double v = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
      v += std::abs(fluid[k][g] - est.mean(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(k)));
    return v / static_cast<double>(grid.size());
  }
};

const RewardStructure& reward_named(const PopulationModel& m, const std::string& name) {
  for (const auto& r : m.rewards)
    if (r.name == name) return r;
  throw UnknownIdentifier(name);
}

struct RewardDef {
  std::string name;
  std::string structure;
  RewardOp op;
  RewardKind kind;
};

const std::vector<RewardDef>& reward_defs() {
  static const std::vector<RewardDef> defs{
      {"phi1_cost_C", "cost", RewardOp::Cumulative, RewardKind::Cumulative},
      {"phi2_diss_I", "diss", RewardOp::Instantaneous, RewardKind::Instantaneous},
      {"phi3_cost_F", "cost", RewardOp::Reachability, RewardKind::Reach},
      {"diss_C", "diss", RewardOp::Cumulative, RewardKind::Cumulative},
  };
  return defs;
}

std::vector<bool> at_d(const PopulationModel& m) {
  std::vector<bool> t(m.n_states(), false);
  t[m.state_index("d")] = true;
  return t;
}

// Fluid values of the reward formulas on a grid, each timed on its own.
void fluid_rewards(const PopulationModel& m, RewardTable& out) {
  const std::size_t a = m.state_index("a");
  const auto target = at_d(m);
  out.fluid.clear();
  out.fluid_seconds.clear();
  for (const auto& def : reward_defs()) {
    const auto t0 = Clock::now();
    out.fluid.push_back(reward_curve(m, def.op, reward_named(m, def.structure), target, a, out.grid));
    out.fluid_seconds.push_back(seconds_since(t0));
  }
}

RewardTable reward_table(const PopulationModel& m, int N, std::uint64_t seed) {
  RewardTable out;
  out.N = N;
  out.grid = uniform_grid(1000.0, 10.0);
  fluid_rewards(m, out);

  Observables obs;
  for (const auto& def : reward_defs())
    obs.rewards.push_back({def.name, reward_named(m, def.structure), def.kind,
                           def.kind == RewardKind::Reach ? at_d(m) : std::vector<bool>{}});
  SimConfig cfg;
  cfg.N = N;
  cfg.t_max = 1000.0;
  cfg.runs = 1000;
  cfg.seed = seed;
  cfg.grid = out.grid;
  cfg.tag_initial_state = "a";
  out.est = run_ensemble(m, cfg, obs);
  return out;
}

Outcome criterion2(const RewardTable& t) {
  Outcome o{"2", "reward table (bike, N=300, 1000 runs, grid step 10 on [0,1000])", true, "", 0.0};
  const bool phi3_in_ci = t.gap(2) <= t.hw(2);
  o.pass = t.rel(0) <= 0.05 && t.rel(1) <= 0.05 && phi3_in_ci && t.rel(2) <= 0.10;
  std::ostringstream d;
  const char* names[] = {"Phi1", "Phi2", "Phi3", "cumulative diss (informative)"};
  for (std::size_t k = 0; k < 4; ++k)
    d << names[k] << ": fluid " << fmt("%.6g", t.fluid[k].back()) << ", stat " << fmt("%.6g", t.stat(k)) << " +- "
      << fmt("%.3g", t.hw(k)) << ", max err " << fmt("%.4g", t.max_err(k)) << ", mean err "
      << fmt("%.4g", t.mean_err(k)) << ", rel err " << fmt("%.4f", t.rel(k)) << "; ";
  d << "Phi3 fluid inside CI: " << (phi3_in_ci ? "yes" : "no");
  o.detail = d.str();
  return o;
}

// ------------------------------------------------------------ criterion 3

Outcome criterion3(const PopulationModel& m, const RewardTable& t) {
  Outcome o{"3", "cost asymmetry (fluid >= 100x faster, fluid cost independent of N)", true, "", 0.0};
  std::ostringstream d;
  for (std::size_t k = 0; k < 3; ++k) {
    const double speedup = t.est.seconds / t.fluid_seconds[k];
    o.pass &= speedup >= 100.0;
    d << "Phi" << k + 1 << fmt(": fluid %.4fs, speedup %.0fx; ", t.fluid_seconds[k], speedup);
  }
  // The fluid problem is stated in densities, so N never enters it; the
  // timing at both N is the best of five repetitions.
  auto best_of = [&](int N) {
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 5; ++rep) {
      RewardTable tmp;
      tmp.N = N;
      tmp.grid = t.grid;
      const auto t0 = Clock::now();
      fluid_rewards(m, tmp);
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };
  const double c300 = best_of(300), c3000 = best_of(3000);
  const double ratio = std::max(c300, c3000) / std::min(c300, c3000);
  o.pass &= ratio <= 1.2;
  d << fmt("statistical %.1fs; fluid N=300 %.4fs, N=3000 %.4fs, ratio %.3f", t.est.seconds, c300, c3000, ratio);
  o.detail = d.str();
  return o;
}

// ------------------------------------------------------------ criterion 4

Outcome criterion4(const Context& ctx) {
  Outcome o{"4", "exact oracles (2-state closed forms, N=3 collective chain)", true, "", 0.0};
  std::ostringstream d;
  auto check = [&](const std::string& what, double got, double want, double tol) {
    const double err = std::abs(got - want);
    const bool ok = err <= tol;
    o.pass &= ok;
    d << what << fmt(" err %.2e", err) << (ok ? "" : " FAIL") << "; ";
  };
  const auto two = load_model(ctx.models / "two_state.fmc");
  const auto asym = load_model(ctx.models / "two_state_asym.fmc");
  const std::size_t on = two.state_index("on");
  const auto sol = transient(two, on, 1.0);
  check("transient x_on(1)", sol.x(1.0)[on], (1 + std::exp(-2.0)) / 2, 1e-7);
  check("transient P_on(1)", sol.final_P()(0, 0), (1 + std::exp(-2.0)) / 2, 1e-7);
  const auto until = parse_formula("P=? [ at_on U[0,1] at_off ]", two);
  check("until", check_path_probability(two, until->path, on, 0.0), 1 - std::exp(-1.0), 1e-7);
  const auto& flips = reward_named(two, "flips");
  for (double T : {1.0, 5.0})
    check(fmt("cumulative T=%g", T), cumulative_reward(two, flips, on, T).value,
          T / 2 + (1 - std::exp(-2 * T)) / 4, 1e-6);
  check("steady state", steady_state_reward(asym, reward_named(asym, "occ")).value, 1.0 / 3.0, 1e-9);

  // 2-state toy with N = 3: the counting chain (3,0) ... (0,3) has down-chain
  // rates 3k1, 2k1, k1. The tagged agent's marginal at T from uniformization
  // of that chain against 10^5 SSA runs.
  constexpr int N = 3;
  constexpr double T = 1.0;
  const auto chain = build_collective_generator(two, N);
  const double k1 = two.param_values.at(0);
  const auto at = [&](std::vector<int> c) { return static_cast<Eigen::Index>(chain.index.at(c)); };
  const auto rate_is = [&](std::vector<int> from, std::vector<int> to, double want) {
    return std::abs(chain.generator.coeff(at(std::move(from)), at(std::move(to))) - want) <= 1e-12;
  };
  const bool rates_ok = chain.states.size() == 4 && rate_is({3, 0}, {2, 1}, 3 * k1) &&
                        rate_is({2, 1}, {1, 2}, 2 * k1) && rate_is({1, 2}, {0, 3}, k1);
  o.pass &= rates_ok;
  d << "4-state chain with rates 3k1, 2k1, k1 " << (rates_ok ? "ok" : "FAIL") << "; ";
  std::vector<double> p0(chain.states.size(), 0.0);
  p0[chain.index.at(initial_counts(two, N).counts)] = 1.0;
  const auto p = uniformization_transient(chain.generator, p0, T);
  // Agents start together and are exchangeable, so P(tagged in i) = E[X_i] / N.
  std::vector<double> exact(two.n_states(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t i = 0; i < two.n_states(); ++i) exact[i] += p[k] * chain.states[k][i] / double(N);
  SimConfig cfg;
  cfg.N = N;
  cfg.t_max = T;
  cfg.runs = 100000;
  cfg.seed = ctx.seed;
  cfg.grid = {0.0, T};
  cfg.tag_initial_state = "on";
  const auto est = estimate_state_probs(two, cfg);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < two.n_states(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double err = std::abs(est.mean(1, c) - exact[i]);
    inside += err <= est.half_width(1, c);
    d << "P_" << two.agent.name(i) << fmt(" exact %.5f ssa %.5f +- %.5f", exact[i], est.mean(1, c), est.half_width(1, c))
      << "; ";
  }
  o.pass &= inside == two.n_states();
  d << fmt("%zu/%zu inside the 95%% CI", inside, two.n_states());
  o.detail = d.str();
  return o;
}

// ------------------------------------------------------------ criterion 5

Outcome criterion5(const Context& ctx) {
  Outcome o{"5", "property suites", true, "", 0.0};
  std::ostringstream d;
  auto record = [&](const std::string& what, bool ok, const std::string& info) {
    o.pass &= ok;
    d << what << " " << (ok ? "ok" : "FAIL") << " (" << info << "); ";
  };
  const auto bike = load_model(ctx.models / "bike.fmc");
  const auto sir = load_model(ctx.models / "sir.fmc");
  const auto asym = load_model(ctx.models / "two_state_asym.fmc");
  const std::size_t a = bike.state_index("a");

  {  // simplex conservation
    double worst_sum = 0.0, worst_min = 0.0;
    for (const auto* m : {&bike, &sir}) {
      const auto traj = solve_fluid(*m, 1000.0);
      std::vector<double> x(m->n_states());
      for (double t : traj.mesh()) {
        traj.eval(t, x);
        double s = 0.0;
        for (double v : x) {
          s += v;
          worst_min = std::min(worst_min, v);
        }
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      }
    }
    record("simplex", worst_sum <= 1e-9 && worst_min >= -1e-12,
           fmt("max |sum-1| %.1e, min %.1e", worst_sum, worst_min));
  }
  {  // row-stochasticity of P and Pi
    double worst = 0.0, neg = 0.0;
    Matrix id = Matrix::Identity(5, 5);
    const auto traj = solve_fluid(bike, 300.0);
    const auto sol = solve_transient(bike, AgentGenerator(bike), id, 200.0);
    for (double t : sol.mesh()) {
      const Matrix p = sol.P(t);
      worst = std::max(worst, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
      neg = std::min(neg, p.minCoeff());
    }
    std::vector<bool> goal(5, false);
    goal[bike.state_index("d")] = true;
    const auto sig = reach_signal(traj, AgentGenerator(bike).with_absorbing(goal), 50.0, 0.0, 200.0);
    for (double t : sig.mesh()) {
      const Matrix p = sig(t);
      worst = std::max(worst, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
      neg = std::min(neg, p.minCoeff());
    }
    record("row-stochastic P and Pi", worst <= 1e-9 && neg >= -1e-9, fmt("max |row-1| %.1e, min %.1e", worst, neg));
  }
  {  // Pi(t, t + T) is constant in t for a homogeneous generator
    const auto sig = reach_signal(asym, std::vector<bool>(2, false), std::vector<bool>(2, false), 1.0, 10.0);
    const Matrix q = AgentGenerator(asym)(std::vector<double>{0.5, 0.5});
    double worst = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
      const auto exact = uniformization_transient(q, unit_vector(2, r), 1.0);
      for (int k = 0; k <= 100; ++k) {
        const Matrix p = sig(0.1 * k);
        for (std::size_t c = 0; c < 2; ++c)
          worst = std::max(worst, std::abs(p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - exact[c]));
      }
    }
    record("Pi time invariance", worst <= 1e-7, fmt("max dev %.1e", worst));
  }
  const auto& cost = reward_named(bike, "cost");
  const auto& diss = reward_named(bike, "diss");
  {  // cumulative = integral of instantaneous
    constexpr double T = 100.0;
    constexpr std::size_t points = 10000;
    std::vector<double> grid(points + 1);
    for (std::size_t k = 0; k <= points; ++k) grid[k] = T * static_cast<double>(k) / points;
    const auto inst = reward_curve(bike, RewardOp::Instantaneous, cost, {}, a, grid);
    double integral = 0.0;
    for (std::size_t k = 0; k < points; ++k) integral += 0.5 * (inst[k] + inst[k + 1]) * (grid[k + 1] - grid[k]);
    const double cum = cumulative_reward(bike, cost, a, T).value;
    const double rel = relative_error(integral, cum);
    record("cumulative vs integral", rel <= 1e-6, fmt("rel %.1e", rel));
  }
  {  // linearity and additivity
    const auto target = at_d(bike);
    auto values = [&](const RewardStructure& rw) {
      return std::vector<double>{cumulative_reward(bike, rw, a, 500.0).value,
                                 instantaneous_reward(bike, rw, a, 500.0).value, steady_state_reward(bike, rw).value,
                                 reachability_reward(bike, rw, target, a, 500.0).value};
    };
    const auto base_cost = values(cost), base_diss = values(diss);
    const auto scaled_cost = values(scaled(cost, 3.7));
    const auto sum = values(combined(cost, diss));
    double lin = 0.0, add = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      lin = std::max(lin, relative_error(scaled_cost[k], 3.7 * base_cost[k]));
      add = std::max(add, relative_error(sum[k], base_cost[k] + base_diss[k]));
    }
    record("linearity", lin <= 1e-9, fmt("rel %.1e", lin));
    record("additivity", add <= 1e-9, fmt("rel %.1e", add));
  }
  {  // boolean signal against direct evaluation
    const auto f = parse_formula("P>=0.19 [ !at_d U[0,50] at_d ]", bike);
    const auto pf = path_probability_function(bike, f->path, a, 200.0);
    const auto sig = boolean_signal(pf, f->bound, 0.0, 200.0);
    std::mt19937_64 rng(ctx.seed);
    std::size_t wrong = 0, checked = 0;
    auto agrees = [&](double t) {
      for (double c : sig.crossings)
        if (std::abs(t - c) < 1e-6) return true;
      ++checked;
      return sig.value_at(t) == (pf(t) >= 0.19);
    };
    for (int k = 0; k < 1000; ++k)
      if (!agrees(200.0 * uniform01(rng))) ++wrong;
    double from = 0.0;
    for (std::size_t k = 0; k <= sig.crossings.size(); ++k) {
      const double to = k < sig.crossings.size() ? sig.crossings[k] : 200.0;
      if (!agrees(0.5 * (from + to))) ++wrong;
      from = to;
    }
    record("boolean signal samples", wrong == 0 && !sig.crossings.empty(),
           fmt("%zu samples, %zu crossings, %zu wrong", checked, sig.crossings.size(), wrong));
  }
  {  // seed determinism, including the thread count
    SimConfig cfg;
    cfg.N = 300;
    cfg.t_max = 20.0;
    cfg.runs = 96;
    cfg.seed = ctx.seed;
    cfg.grid = uniform_grid(20.0, 1.0);
    cfg.tag_initial_state = "a";
    cfg.threads = 1;
    const auto e1 = estimate_state_probs(bike, cfg);
    const auto e2 = estimate_state_probs(bike, cfg);
    cfg.threads = 3;
    const auto e3 = estimate_state_probs(bike, cfg);
    const bool same = e1.mean == e2.mean && e1.sd == e2.sd && e1.mean == e3.mean && e1.sd == e3.sd;
    record("seed determinism", same, "1 and 3 threads, bit-identical");
  }
  o.detail = d.str();
  return o;
}

// ------------------------------------------------------------ criterion 6

// Later error no larger than the earlier one, up to the combined CI width.
bool non_increasing(double e_prev, double hw_prev, double e_next, double hw_next) {
  return e_next <= e_prev + std::hypot(hw_prev, hw_next);
}

Outcome criterion6(const std::vector<StateAgreement>& states, const std::vector<RewardTable>& tables) {
  Outcome o{"6", "convergence trend in N over {100, 300, 900}", true, "", 0.0};
  std::ostringstream d;
  d << "state sup error:";
  for (const auto& s : states) d << fmt(" N=%d %.4f", s.N, s.worst());
  for (std::size_t k = 1; k < states.size(); ++k)
    o.pass &= non_increasing(states[k - 1].worst(), states[k - 1].worst_hw(), states[k].worst(), states[k].worst_hw());
  const char* names[] = {"Phi1", "Phi2", "Phi3"};
  for (std::size_t r = 0; r < 3; ++r) {
    d << "; " << names[r] << " gap at T=1000:";
    for (const auto& t : tables) d << fmt(" N=%d %.4g", t.N, t.gap(r));
    for (std::size_t k = 1; k < tables.size(); ++k)
      o.pass &= non_increasing(tables[k - 1].gap(r), tables[k - 1].hw(r), tables[k].gap(r), tables[k].hw(r));
  }
  o.detail = d.str();
  return o;
}

}  // namespace

double relative_error(double a, double b) {
  const double gap = std::abs(a - b);
  if (gap == 0.0) return 0.0;
  return gap / std::abs(b);
}

std::vector<Outcome> run_criteria(const Context& ctx) {
  const auto bike = load_model(ctx.models / "bike.fmc");
  std::vector<Outcome> out;
  auto timed = [&](auto&& f) {
    const auto t0 = Clock::now();
    Outcome o = f();
    o.seconds = seconds_since(t0);
    ctx.log << "criterion " << o.id << " " << o.title << ": " << (o.pass ? "PASS" : "FAIL") << "\n  " << o.detail
            << "\n"
            << std::flush;
    out.push_back(std::move(o));
  };

  auto want = [&](int n) { return ctx.only.empty() || ctx.only.count(n) > 0; };

  // Criteria 3 and 6 reuse the N = 300 ensembles of criteria 1 and 2.
  std::vector<StateAgreement> states;
  std::vector<RewardTable> tables;
  if (want(1) || want(6)) states.push_back(state_agreement(bike, 300, ctx.seed));
  if (want(2) || want(3) || want(6)) tables.push_back(reward_table(bike, 300, ctx.seed));
  if (want(1)) timed([&] { return criterion1(bike, states.back()); });
  if (want(2)) timed([&] { return criterion2(tables.back()); });
  if (want(3)) timed([&] { return criterion3(bike, tables.front()); });
  if (want(4)) timed([&] { return criterion4(ctx); });
  if (want(5)) timed([&] { return criterion5(ctx); });
  if (want(6)) timed([&] {
      states.insert(states.begin(), state_agreement(bike, 100, ctx.seed));
      states.push_back(state_agreement(bike, 900, ctx.seed));
      tables.insert(tables.begin(), reward_table(bike, 100, ctx.seed));
      tables.push_back(reward_table(bike, 900, ctx.seed));
      return criterion6(states, tables);
    });
  return out;
}

}  // namespace fluidmc::acceptance
