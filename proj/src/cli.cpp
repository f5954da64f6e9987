#include "fluidmc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fluidmc/check.hpp"
#include "fluidmc/csl.hpp"
#include "fluidmc/error.hpp"
#include "fluidmc/fluid.hpp"
#include "fluidmc/formula.hpp"
#include "fluidmc/io.hpp"
#include "fluidmc/parser.hpp"
#include "fluidmc/plot.hpp"
#include "fluidmc/reward.hpp"
#include "fluidmc/sim.hpp"
#include "fluidmc/validate.hpp"

#ifndef FLUIDMC_VERSION
#define FLUIDMC_VERSION "0.0.0"
#endif

namespace fluidmc {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Manifest {
  json doc = json::object();
  json timings = json::object();

  explicit Manifest(const std::string& command) {
    doc["command"] = command;
    doc["tool_version"] = FLUIDMC_VERSION;
  }
  void input(const std::string& key, const std::string& path, const std::string& bytes) {
    doc[key] = {{"path", path}, {"fnv1a64", hex64(fnv1a64(bytes))}, {"bytes", bytes.size()}};
  }
  void time(const std::string& phase, double s) { timings[phase] = s; }
  std::string dump() {
    doc["timings_s"] = timings;
    return doc.dump(2) + "\n";
  }
};

// Shared flags of every command.
struct Common {
  std::string out = "-";
  std::string manifest;
  double rtol = FluidOptions{}.rtol;
  double atol = FluidOptions{}.atol;

  FluidOptions fluid() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw InputError("tolerances must be > 0");
    return {rtol, atol};
  }
  bool to_stdout() const { return out == "-"; }
};

void add_out(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Output file, '-' for stdout")->capture_default_str();
  cmd->add_option("--manifest", c.manifest, "Manifest path (default: <out>.manifest.json)");
}

void add_tolerances(CLI::App* cmd, Common& c) {
  cmd->add_option("--rtol", c.rtol, "Relative integration tolerance")->capture_default_str();
  cmd->add_option("--atol", c.atol, "Absolute integration tolerance")->capture_default_str();
}

struct Io {
  std::ostream& out;
  std::ostream& err;

  void emit(const Common& c, const std::string& text) const {
    if (c.to_stdout())
      out << text;
    else
      write_text_file(c.out, text);
  }
  // Human-readable notes go to stdout when the data went to a file.
  std::ostream& notes(const Common& c) const { return c.to_stdout() ? err : out; }
  void finish(const Common& c, Manifest& man) const {
    fs::path path = c.manifest;
    if (path.empty()) {
      if (c.to_stdout()) return;
      path = c.out + ".manifest.json";
    }
    write_text_file(path, man.dump());
  }
};

struct LoadedModel {
  PopulationModel model;
  std::string text;
};

LoadedModel load(const std::string& path, Manifest& man) {
  LoadedModel lm;
  lm.text = read_text_file(path);
  lm.model = parse_model(lm.text);
  man.input("model", path, lm.text);
  return lm;
}

std::vector<FormulaLine> load_formulas(const std::string& path, const PopulationModel& m, Manifest& man) {
  const std::string text = read_text_file(path);
  man.input("formula_file", path, text);
  auto lines = parse_formula_list(text, m);
  json list = json::array();
  for (const auto& l : lines) list.push_back(l.text);
  man.doc["formulas"] = list;
  return lines;
}

// The tagged agent of a simulation starts in one state; without --s0 the
// initial densities must name it.
std::size_t state_of(const PopulationModel& m, const std::string& name) {
  if (!name.empty()) return m.state_index(name);
  if (const auto s = point_mass(m.init_density)) return *s;
  throw InputError("--s0 is required when the initial densities are not a point mass");
}

std::string kind_name(const Formula& f) {
  if (f.kind == Formula::Kind::Prob) return "P";
  if (f.kind != Formula::Kind::Reward) return "state";
  switch (f.reward.op) {
    case RewardOp::Cumulative: return "C";
    case RewardOp::Instantaneous: return "I";
    case RewardOp::SteadyState: return "S";
    case RewardOp::Reachability: return "F";
  }
  return "R";
}

std::string horizon_of(const Formula& f) {
  if (f.kind == Formula::Kind::Prob) return format_number(f.path.t2);
  if (f.kind == Formula::Kind::Reward && f.reward.op != RewardOp::SteadyState) return format_number(f.reward.T);
  return "";
}

constexpr const char* kResultHeader = "formula,kind,s0,T,value,ci_low,ci_high,source\n";

std::string result_row(const std::string& formula, const std::string& kind, const std::string& s0,
                       const std::string& T, double value, std::optional<std::pair<double, double>> ci,
                       const std::string& source) {
  std::string row = csv_field(formula) + "," + kind + "," + s0 + "," + T + "," + format_number(value) + ",";
  if (ci) row += format_number(ci->first) + "," + format_number(ci->second);
  else row += ",";
  return row + "," + source + "\n";
}

fs::path sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  fs::path stem = p.parent_path() / p.stem();
  return fs::path(stem.string() + suffix);
}

// ---------------------------------------------------------------- fluid

struct FluidArgs {
  Common c;
  std::string model;
  double tmax = 100.0;
  double step = 0.0;
};

int cmd_fluid(const FluidArgs& a, const Io& io) {
  Manifest man("fluid");
  auto t0 = Clock::now();
  const auto lm = load(a.model, man);
  const auto& m = lm.model;
  man.time("parse", seconds_since(t0));
  if (!(a.tmax >= 0.0) || !std::isfinite(a.tmax)) throw InputError("--tmax must be finite and >= 0");
  const double step = a.step > 0.0 ? a.step : (a.tmax > 0.0 ? a.tmax / 100.0 : 1.0);
  man.doc["config"] = {{"tmax", a.tmax}, {"grid_step", step}, {"rtol", a.c.rtol}, {"atol", a.c.atol}};
  t0 = Clock::now();
  const auto traj = solve_fluid(m, a.tmax, a.c.fluid());
  man.time("fluid", seconds_since(t0));
  std::string csv = "t";
  for (const auto& s : m.agent.names()) csv += ",x_" + s;
  csv += "\n";
  std::vector<double> x(m.n_states());
  for (double t : uniform_grid(a.tmax, step)) {
    traj.eval(t, x);
    csv += format_number(t);
    for (double v : x) csv += "," + format_number(v);
    csv += "\n";
  }
  io.emit(a.c, csv);
  man.doc["stats"] = {{"accepted", traj.stats().accepted}, {"rejected", traj.stats().rejected}};
  io.finish(a.c, man);
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common c;
  std::string model;
  int N = 100;
  std::size_t runs = 1000;
  std::uint64_t seed = 1;
  double tmax = 100.0;
  double step = 0.0;
  std::string tag;
};

std::string estimate_csv(const EnsembleEstimate& est) {
  std::string csv = "t";
  for (const auto& c : est.columns) csv += ",mean_" + c;
  for (const auto& c : est.columns) csv += ",ci_" + c;
  csv += "\n";
  for (std::size_t i = 0; i < est.grid.size(); ++i) {
    csv += format_number(est.grid[i]);
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < est.mean.cols(); ++j) csv += "," + format_number(est.mean(r, j));
    for (Eigen::Index j = 0; j < est.mean.cols(); ++j) csv += "," + format_number(est.half_width(r, j));
    csv += "\n";
  }
  return csv;
}

int cmd_simulate(const SimulateArgs& a, const Io& io) {
  Manifest man("simulate");
  const auto lm = load(a.model, man);
  const auto& m = lm.model;
  const double step = a.step > 0.0 ? a.step : (a.tmax > 0.0 ? a.tmax / 100.0 : 1.0);
  SimConfig cfg;
  cfg.N = a.N;
  cfg.t_max = a.tmax;
  cfg.runs = a.runs;
  cfg.seed = a.seed;
  cfg.grid = uniform_grid(a.tmax, step);
  cfg.tag_initial_state = a.tag;
  man.doc["config"] = {{"N", a.N},       {"runs", a.runs}, {"seed", a.seed},
                       {"tmax", a.tmax}, {"grid_step", step}, {"tag", a.tag},
                       {"threads", worker_threads()}};
  const auto t0 = Clock::now();
  const auto est = a.tag.empty() ? estimate_population(m, cfg) : estimate_state_probs(m, cfg);
  man.time("simulation", seconds_since(t0));
  io.emit(a.c, estimate_csv(est));
  if (est.few_runs()) io.notes(a.c) << "note: fewer than 30 runs, confidence intervals are unreliable\n";
  io.finish(a.c, man);
  return kExitOk;
}

// ---------------------------------------------------------------- check

struct CheckArgs {
  Common c;
  std::string model;
  std::string formulas;
  std::string s0;
  double twin = 0.0;
};

std::string signal_csv(const std::string& text, const std::string& s0, const ProbabilityFunction* values,
                       const BooleanSignal* sig, double twin) {
  std::string csv = "# formula: " + text + "\n# s0: " + s0 + "\nt_from,t_to,value\n";
  if (values) {
    std::vector<double> pts = values->mesh();
    for (double t : pts) {
      if (t < 0.0 || t > twin) continue;
      csv += format_number(t) + "," + format_number(t) + "," + format_number((*values)(t)) + "\n";
    }
    return csv;
  }
  double from = sig->t_begin;
  for (std::size_t k = 0; k < sig->truth.size(); ++k) {
    const double to = k < sig->crossings.size() ? sig->crossings[k] : sig->t_end;
    csv += format_number(from) + "," + format_number(to) + "," + (sig->truth[k] ? "true" : "false") + "\n";
    from = to;
  }
  for (double t : sig->crossings) csv += "# crossing," + format_number(t) + "\n";
  for (double t : sig->indeterminate) csv += "# indeterminate," + format_number(t) + "\n";
  return csv;
}

int cmd_check(const CheckArgs& a, const Io& io) {
  Manifest man("check");
  const auto lm = load(a.model, man);
  const auto& m = lm.model;
  const auto lines = load_formulas(a.formulas, m, man);
  // Without --s0 the initial state is drawn from the initial densities.
  const std::vector<double> p0 = a.s0.empty() ? m.init_density : unit_vector(m.n_states(), m.state_index(a.s0));
  const auto point = point_mass(p0);
  const std::string s0 = point ? m.agent.name(*point) : "init";
  if (!(a.twin >= 0.0) || !std::isfinite(a.twin)) throw InputError("--twin must be finite and >= 0");
  const FluidOptions opts = a.c.fluid();
  man.doc["config"] = {{"s0", s0}, {"twin", a.twin}, {"rtol", a.c.rtol}, {"atol", a.c.atol}};

  int code = kExitOk;
  std::string csv = kResultHeader;
  std::string extra;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const Formula& f = *lines[k].formula;
    const auto t0 = Clock::now();
    const CheckResult r = check_formula(m, f, p0, opts);
    double value = r.value;
    if (f.kind != Formula::Kind::Prob && f.kind != Formula::Kind::Reward)
      value = r.verdict == Verdict::True ? 1.0 : r.verdict == Verdict::False ? 0.0 : std::nan("");
    csv += result_row(lines[k].text, kind_name(f), s0, horizon_of(f), value, std::nullopt, "fluid");
    if (r.verdict == Verdict::Indeterminate) code = kExitIndeterminate;
    io.notes(a.c) << lines[k].text << ": " << to_string(r.verdict);
    if (!std::isnan(r.value)) io.notes(a.c) << " " << format_number(r.value);
    io.notes(a.c) << "\n";

    if (f.kind == Formula::Kind::Prob && a.twin > 0.0) {
      const auto pf = path_probability_function(m, f.path, p0, a.twin, opts);
      std::string sig_text;
      if (f.bound.is_query()) {
        sig_text = signal_csv(lines[k].text, s0, &pf, nullptr, a.twin);
      } else {
        const BooleanSignal sig = boolean_signal(pf, f.bound, 0.0, a.twin);
        if (!sig.indeterminate.empty()) code = kExitIndeterminate;
        sig_text = signal_csv(lines[k].text, s0, nullptr, &sig, a.twin);
      }
      if (a.c.to_stdout()) {
        extra += "\n" + sig_text;
      } else {
        const fs::path p = sibling(a.c.out, ".signal" + std::to_string(k + 1) + ".csv");
        write_text_file(p, sig_text);
      }
    }
    man.time("formula_" + std::to_string(k + 1), seconds_since(t0));
  }
  io.emit(a.c, csv + extra);
  io.finish(a.c, man);
  return code;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  Common c;
  std::string model;
  std::string formulas;
  std::string s0;
  int N = 300;
  std::size_t runs = 1000;
  std::uint64_t seed = 1;
  double step = 10.0;
  std::string summary;
  std::string results;
  std::string svg;
};

struct ComparisonSummary {
  double max_err = 0.0;
  double mean_err = 0.0;
  double rel_err_final = 0.0;
  double cost_stat = 0.0;
  double cost_fluid = 0.0;
};

int cmd_compare(const CompareArgs& a, const Io& io) {
  Manifest man("compare");
  const auto lm = load(a.model, man);
  const auto& m = lm.model;
  const auto lines = load_formulas(a.formulas, m, man);
  const std::size_t s = state_of(m, a.s0);
  const std::string s0 = m.agent.name(s);
  const FluidOptions opts = a.c.fluid();
  man.doc["config"] = {{"s0", s0},          {"N", a.N},           {"runs", a.runs},
                       {"seed", a.seed},    {"grid_step", a.step}, {"rtol", a.c.rtol},
                       {"atol", a.c.atol},  {"threads", worker_threads()}};

  std::string csv = "formula,t,fluid,stat_mean,stat_ci,abs_err\n";
  std::string summary = "formula,max_err,mean_err,rel_err_final,cost_stat_s,cost_fluid_s\n";
  std::string results = kResultHeader;
  std::vector<std::pair<std::string, std::string>> charts;
  std::size_t compared = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const Formula& f = *lines[k].formula;
    if (f.kind != Formula::Kind::Reward || f.reward.op == RewardOp::SteadyState) {
      io.err << "skipping '" << lines[k].text << "': compare handles C, I and F reward formulas\n";
      continue;
    }
    ++compared;
    const RewardStructure& rw = m.rewards.at(f.reward.reward);
    std::vector<bool> target(m.n_states(), false);
    RewardKind kind = RewardKind::Cumulative;
    if (f.reward.op == RewardOp::Instantaneous) kind = RewardKind::Instantaneous;
    if (f.reward.op == RewardOp::Reachability) {
      kind = RewardKind::Reach;
      target = satisfaction_set(*f.reward.target, m.n_states());
    }
    const double T = f.reward.T;
    const auto grid = uniform_grid(T, a.step);

    auto t0 = Clock::now();
    const auto fluid = reward_curve(m, f.reward.op, rw, target, s, grid, opts);
    ComparisonSummary sum;
    sum.cost_fluid = seconds_since(t0);

    SimConfig cfg;
    cfg.N = a.N;
    cfg.t_max = T;
    cfg.runs = a.runs;
    cfg.seed = a.seed;
    cfg.grid = grid;
    cfg.tag_initial_state = s0;
    t0 = Clock::now();
    const auto est = estimate_reward(m, rw, kind, cfg, target);
    sum.cost_stat = seconds_since(t0);

    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double e = std::abs(fluid[i] - est.mean(r, 0));
      sum.max_err = std::max(sum.max_err, e);
      sum.mean_err += e / static_cast<double>(grid.size());
      csv += csv_field(lines[k].text) + "," + format_number(grid[i]) + "," + format_number(fluid[i]) + "," +
             format_number(est.mean(r, 0)) + "," + format_number(est.half_width(r, 0)) + "," + format_number(e) +
             "\n";
    }
    const auto last = static_cast<Eigen::Index>(grid.size() - 1);
    const double stat_T = est.mean(last, 0), hw = est.half_width(last, 0);
    const double gap = std::abs(fluid.back() - stat_T);
    sum.rel_err_final = gap == 0.0 ? 0.0 : gap / std::abs(stat_T);
    summary += csv_field(lines[k].text) + "," + format_number(sum.max_err) + "," + format_number(sum.mean_err) + "," +
               format_number(sum.rel_err_final) + "," + format_number(sum.cost_stat) + "," +
               format_number(sum.cost_fluid) + "\n";
    results += result_row(lines[k].text, kind_name(f), s0, format_number(T), fluid.back(), std::nullopt, "fluid");
    results += result_row(lines[k].text, kind_name(f), s0, format_number(T), stat_T,
                          std::make_pair(stat_T - hw, stat_T + hw), "statistical");
    man.time("fluid_" + std::to_string(k + 1), sum.cost_fluid);
    man.time("statistical_" + std::to_string(k + 1), sum.cost_stat);

    if (!a.svg.empty()) {
      std::vector<double> mean(grid.size()), lo(grid.size()), hi(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        mean[i] = est.mean(r, 0);
        lo[i] = mean[i] - est.half_width(r, 0);
        hi[i] = mean[i] + est.half_width(r, 0);
      }
      std::vector<PlotSeries> series{{"fluid", grid, fluid, false},
                                     {"statistical", grid, mean, true},
                                     {"95% low", grid, lo, true},
                                     {"95% high", grid, hi, true}};
      charts.emplace_back(lines[k].text, render_line_chart(series, lines[k].text, "T", "reward"));
    }
  }
  if (compared == 0) throw InputError("no comparable formulas (C, I or F reward operators)");
  io.emit(a.c, csv);
  if (!a.summary.empty()) write_text_file(a.summary, summary);
  if (!a.results.empty()) write_text_file(a.results, results);
  io.notes(a.c) << summary;
  for (std::size_t k = 0; k < charts.size(); ++k) {
    fs::path p = a.svg;
    if (charts.size() > 1) p = sibling(a.svg, "-" + std::to_string(k + 1) + ".svg");
    write_text_file(p, charts[k].second);
  }
  io.finish(a.c, man);
  return kExitOk;
}

// ---------------------------------------------------------------- steady

struct SteadyArgs {
  Common c;
  std::string model;
  SteadyStateOptions opts;
};

int cmd_steady(const SteadyArgs& a, const Io& io) {
  Manifest man("steady");
  const auto lm = load(a.model, man);
  const auto& m = lm.model;
  man.doc["config"] = {{"tolerance", a.opts.tolerance}, {"window", a.opts.window}, {"t_limit", a.opts.t_limit}};
  const auto t0 = Clock::now();
  const SteadyState ss = steady_state(m, a.opts);
  std::vector<double> pi;
  std::string pi_note;
  try {
    pi = invariant_measure(AgentGenerator(m)(ss.x_star));
  } catch (const NonUniqueInvariantMeasure& e) {
    pi_note = e.what();
  } catch (const MultiplicityUnsupported& e) {
    pi_note = e.what();
  }
  man.time("steady", seconds_since(t0));
  std::string csv = "state,x_star,pi_star\n";
  for (std::size_t i = 0; i < m.n_states(); ++i)
    csv += m.agent.name(i) + "," + format_number(ss.x_star[i]) + "," + (pi.empty() ? "" : format_number(pi[i])) +
           "\n";
  io.emit(a.c, csv);
  auto& notes = io.notes(a.c);
  notes << "method " << ss.method << ", residual " << format_number(ss.residual) << ", t_relax "
        << format_number(ss.t_relax) << " (" << ss.assumption << ")\n";
  if (!pi_note.empty()) notes << "invariant measure: " << pi_note << "\n";
  for (const auto& rw : m.rewards) {
    if (pi.empty()) break;
    double v = 0.0;
    for (std::size_t i = 0; i < m.n_states(); ++i) v += rw.state_reward[i] * pi[i];
    notes << "steady-state reward " << rw.name << " " << format_number(v) << "\n";
  }
  man.doc["result"] = {{"method", ss.method}, {"residual", ss.residual}, {"t_relax", ss.t_relax}};
  io.finish(a.c, man);
  return kExitOk;
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
  Common c;
  std::vector<std::string> inputs;
  std::string title = "fluidmc";
  std::vector<std::string> columns;
};

int cmd_plot(const PlotArgs& a, const Io& io) {
  Manifest man("plot");
  std::vector<PlotSeries> series;
  std::string time_name;
  for (const auto& path : a.inputs) {
    const std::string text = read_text_file(path);
    man.input("input_" + std::to_string(series.size()), path, text);
    const CsvTable t = parse_csv(text);
    if (t.rows.empty()) throw InputError("'" + path + "' has no data rows");
    if (time_name.empty()) time_name = t.header.front();
    if (t.header.front() != time_name) throw InputError("'" + path + "' does not share the time column");
    const auto x = t.numeric(0);
    const std::string prefix = a.inputs.size() > 1 ? fs::path(path).stem().string() + ":" : "";
    for (std::size_t j = 1; j < t.header.size(); ++j) {
      const std::string& name = t.header[j];
      if (name.rfind("ci_", 0) == 0) continue;
      if (!a.columns.empty() && std::find(a.columns.begin(), a.columns.end(), name) == a.columns.end()) continue;
      series.push_back({prefix + name, x, t.numeric(j), name.rfind("mean_", 0) == 0});
    }
  }
  if (series.empty()) throw InputError("no columns to plot");
  io.emit(a.c, render_line_chart(series, a.title, time_name));
  io.finish(a.c, man);
  return kExitOk;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  Common c;
  std::string model;
  std::string formulas;
};

int cmd_validate(const ValidateArgs& a, const Io& io) {
  Manifest man("validate");
  const auto lm = load(a.model, man);
  const auto& m = lm.model;
  const auto diags = validate(m);
  std::ostringstream os;
  bool error = false;
  for (const auto& d : diags) {
    os << to_string(d.severity) << " " << d.code << ": " << d.message << "\n";
    error |= d.severity == Severity::Error;
  }
  if (!a.formulas.empty()) {
    const auto lines = load_formulas(a.formulas, m, man);
    os << lines.size() << " formulas parsed\n";
  }
  os << m.n_states() << " states, " << m.transitions.size() << " transitions, " << diags.size()
     << " diagnostics\n";
  io.emit(a.c, os.str());
  io.finish(a.c, man);
  return error ? kExitInputError : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fluid model checking of a tagged agent in a population model", "fluidmc"};
  app.set_version_flag("--version", FLUIDMC_VERSION);
  app.require_subcommand(1);

  FluidArgs fa;
  auto* fluid = app.add_subcommand("fluid", "Fluid trajectory on a grid");
  fluid->add_option("model", fa.model, "Model file")->required();
  fluid->add_option("--tmax", fa.tmax, "Time horizon")->capture_default_str();
  fluid->add_option("--grid", fa.step, "Grid step (default tmax/100)");
  add_out(fluid, fa.c);
  add_tolerances(fluid, fa.c);

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Stochastic simulation estimates");
  simulate->add_option("model", sa.model, "Model file")->required();
  simulate->add_option("--N", sa.N, "Population size")->capture_default_str();
  simulate->add_option("--runs", sa.runs, "Replications")->capture_default_str();
  simulate->add_option("--seed", sa.seed, "Seed")->capture_default_str();
  simulate->add_option("--tmax", sa.tmax, "Time horizon")->capture_default_str();
  simulate->add_option("--grid", sa.step, "Grid step (default tmax/100)");
  simulate->add_option("--tag", sa.tag, "Initial state of the tagged agent (omit for population densities)");
  add_out(simulate, sa.c);

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "Fluid model checking of a formula file");
  check->add_option("model", ca.model, "Model file")->required();
  check->add_option("formulas", ca.formulas, "Formula file, one per line")->required();
  check->add_option("--s0", ca.s0, "Initial agent state (default: drawn from the initial densities)");
  check->add_option("--twin", ca.twin, "Window of initial times for P signals (0: none)")->capture_default_str();
  add_out(check, ca.c);
  add_tolerances(check, ca.c);

  CompareArgs pa;
  auto* compare = app.add_subcommand("compare", "Fluid against statistical reward estimates");
  compare->add_option("model", pa.model, "Model file")->required();
  compare->add_option("formulas", pa.formulas, "Formula file, one per line")->required();
  compare->add_option("--s0", pa.s0, "Initial agent state (default: the state holding all initial density)");
  compare->add_option("--N", pa.N, "Population size")->capture_default_str();
  compare->add_option("--runs", pa.runs, "Replications")->capture_default_str();
  compare->add_option("--seed", pa.seed, "Seed")->capture_default_str();
  compare->add_option("--grid", pa.step, "Grid step")->capture_default_str();
  compare->add_option("--summary", pa.summary, "Error summary CSV");
  compare->add_option("--results", pa.results, "Result rows with confidence intervals");
  compare->add_option("--svg", pa.svg, "SVG overlay of fluid and statistical curves");
  add_out(compare, pa.c);
  add_tolerances(compare, pa.c);

  SteadyArgs ya;
  auto* steady = app.add_subcommand("steady", "Fluid equilibrium and the agent's invariant measure");
  steady->add_option("model", ya.model, "Model file")->required();
  steady->add_option("--tolerance", ya.opts.tolerance, "Drift norm tolerance")->capture_default_str();
  steady->add_option("--window", ya.opts.window, "Time the tolerance must hold")->capture_default_str();
  steady->add_option("--t-limit", ya.opts.t_limit, "Integration limit")->capture_default_str();
  add_out(steady, ya.c);

  PlotArgs la;
  auto* plot = app.add_subcommand("plot", "Static SVG line chart of CSV files");
  plot->add_option("csv", la.inputs, "CSV files sharing the time column")->required();
  plot->add_option("--title", la.title, "Chart title")->capture_default_str();
  plot->add_option("--columns", la.columns, "Columns to draw (default: all but ci_*)");
  add_out(plot, la.c);

  ValidateArgs va;
  auto* val = app.add_subcommand("validate", "Parse and validate a model");
  val->add_option("model", va.model, "Model file")->required();
  val->add_option("--formulas", va.formulas, "Formula file to parse against the model");
  add_out(val, va.c);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? kExitOk : kExitInputError;
  }

  const Io io{out, err};
  try {
    if (*fluid) return cmd_fluid(fa, io);
    if (*simulate) return cmd_simulate(sa, io);
    if (*check) return cmd_check(ca, io);
    if (*compare) return cmd_compare(pa, io);
    if (*steady) return cmd_steady(ya, io);
    if (*plot) return cmd_plot(la, io);
    if (*val) return cmd_validate(va, io);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumericError;
  }
  return kExitInputError;
}

}  // namespace fluidmc
