#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fluidmc/check.hpp"
#include "fluidmc/cli.hpp"
#include "fluidmc/csl.hpp"
#include "fluidmc/error.hpp"
#include "fluidmc/fluid.hpp"
#include "fluidmc/formula.hpp"
#include "fluidmc/parser.hpp"
#include "fluidmc/reward.hpp"
#include "fluidmc/sim.hpp"
#include "fluidmc/validate.hpp"

namespace py = pybind11;
using namespace fluidmc;

namespace {

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  auto v = a.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i, j) = m(i, j);
  return a;
}

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InputError("expected a 2-d array");
  Matrix m(a.shape(0), a.shape(1));
  auto v = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = v(i, j);
  return m;
}

std::size_t state(const PopulationModel& m, const std::string& s) { return m.state_index(s); }

const RewardStructure& reward(const PopulationModel& m, const std::string& name) {
  const auto* rw = m.reward(name);
  if (!rw) throw UnknownIdentifier(name);
  return *rw;
}

FluidOptions options(double rtol, double atol) { return FluidOptions{rtol, atol}; }

py::dict estimate_dict(const EnsembleEstimate& e) {
  py::dict d;
  d["grid"] = e.grid;
  d["columns"] = e.columns;
  d["mean"] = to_array(e.mean);
  d["half_width"] = to_array(e.half_width);
  d["runs"] = e.runs;
  d["seconds"] = e.seconds;
  return d;
}

SimConfig sim_config(int N, double t_max, std::size_t runs, std::uint64_t seed, std::vector<double> grid,
                     std::size_t threads) {
  SimConfig c;
  c.N = N;
  c.t_max = t_max;
  c.runs = runs;
  c.seed = seed;
  c.grid = grid.empty() ? uniform_grid(t_max, t_max / 100.0) : std::move(grid);
  c.threads = threads;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fluid model checking of population models";
  m.attr("__version__") = FLUIDMC_VERSION;

  auto base = py::register_exception<Error>(m, "Error");
  auto input = py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", input.ptr());
  py::register_exception<UnknownIdentifier>(m, "UnknownIdentifier", input.ptr());

  py::class_<PopulationModel>(m, "Model")
      .def_readonly("name", &PopulationModel::name)
      .def_property_readonly("states", [](const PopulationModel& p) { return p.agent.names(); })
      .def_property_readonly("transitions",
                             [](const PopulationModel& p) {
                               std::vector<std::string> names;
                               for (const auto& t : p.transitions) names.push_back(t.name);
                               return names;
                             })
      .def_property_readonly("labels",
                             [](const PopulationModel& p) {
                               std::vector<std::string> names;
                               for (const auto& l : p.labels) names.push_back(l.name);
                               return names;
                             })
      .def_property_readonly("rewards",
                             [](const PopulationModel& p) {
                               std::vector<std::string> names;
                               for (const auto& r : p.rewards) names.push_back(r.name);
                               return names;
                             })
      .def_readonly("init_density", &PopulationModel::init_density)
      .def("drift", [](const PopulationModel& p, std::vector<double> x) { return drift(p, x); }, py::arg("x"))
      .def("generator", [](const PopulationModel& p, std::vector<double> x) { return to_array(AgentGenerator(p)(x)); },
           py::arg("x"))
      .def("__str__", &print_model)
      .def("__repr__", [](const PopulationModel& p) {
        return "<fluidmc.Model '" + p.name + "' with " + std::to_string(p.n_states()) + " states>";
      });

  m.def("parse_model", &parse_model, py::arg("text"));
  m.def("load_model", &load_model, py::arg("path"));
  m.def(
      "validate",
      [](const PopulationModel& p) {
        std::vector<py::dict> out;
        for (const auto& d : validate(p)) {
          py::dict e;
          e["severity"] = to_string(d.severity);
          e["code"] = d.code;
          e["message"] = d.message;
          out.push_back(e);
        }
        return out;
      },
      py::arg("model"));

  m.def(
      "fluid",
      [](const PopulationModel& p, std::vector<double> grid, double rtol, double atol) {
        if (grid.empty()) throw InputError("empty time grid");
        const auto traj = solve_fluid(p, grid.back(), options(rtol, atol));
        Matrix x(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(p.n_states()));
        for (std::size_t k = 0; k < grid.size(); ++k) {
          const auto v = traj(grid[k]);
          for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = v[i];
        }
        return to_array(x);
      },
      py::arg("model"), py::arg("grid"), py::arg("rtol") = 1e-8, py::arg("atol") = 1e-10,
      "Fluid densities x(t) at every grid point, one row per time.");

  m.def(
      "transient",
      [](const PopulationModel& p, const std::string& s0, double T, double rtol, double atol) {
        return to_array(transient(p, state(p, s0), T, options(rtol, atol)).final_P());
      },
      py::arg("model"), py::arg("s0"), py::arg("T"), py::arg("rtol") = 1e-8, py::arg("atol") = 1e-10,
      "Tagged-agent distribution at T.");

  m.def(
      "steady_state",
      [](const PopulationModel& p) {
        const auto ss = steady_state(p);
        py::dict d;
        d["x_star"] = ss.x_star;
        d["residual"] = ss.residual;
        d["method"] = ss.method;
        d["t_relax"] = ss.t_relax;
        d["pi_star"] = invariant_measure(AgentGenerator(p)(ss.x_star));
        return d;
      },
      py::arg("model"));

  m.def(
      "check",
      [](const PopulationModel& p, const std::string& formula, const std::string& s0, double rtol, double atol) {
        const auto f = parse_formula(formula, p);
        const auto r = check_formula(p, *f, state(p, s0), options(rtol, atol));
        py::dict d;
        d["verdict"] = to_string(r.verdict);
        d["value"] = r.value;
        return d;
      },
      py::arg("model"), py::arg("formula"), py::arg("s0"), py::arg("rtol") = 1e-8, py::arg("atol") = 1e-10,
      "Checks a state formula from s0 at time 0.");

  m.def(
      "probability_curve",
      [](const PopulationModel& p, const std::string& formula, const std::string& s0, std::vector<double> times) {
        const auto f = parse_formula(formula, p);
        if (f->kind != Formula::Kind::Prob) throw InputError("expected a P formula");
        if (times.empty()) return std::vector<double>{};
        const auto fn = path_probability_function(p, f->path, state(p, s0), times.back());
        std::vector<double> out;
        for (double t : times) out.push_back(fn(t));
        return out;
      },
      py::arg("model"), py::arg("formula"), py::arg("s0"), py::arg("times"),
      "Path probability as a function of the initial time.");

  m.def(
      "boolean_signal",
      [](const PopulationModel& p, const std::string& formula, const std::string& s0, double t_win) {
        const auto f = parse_formula(formula, p);
        const auto sig = boolean_signal(p, *f, state(p, s0), t_win);
        py::dict d;
        d["crossings"] = sig.crossings;
        d["truth"] = std::vector<bool>(sig.truth.begin(), sig.truth.end());
        d["indeterminate"] = sig.indeterminate;
        return d;
      },
      py::arg("model"), py::arg("formula"), py::arg("s0"), py::arg("t_win"));

  m.def(
      "cumulative_reward",
      [](const PopulationModel& p, const std::string& rw, const std::string& s0, double T) {
        return cumulative_reward(p, reward(p, rw), state(p, s0), T).value;
      },
      py::arg("model"), py::arg("reward"), py::arg("s0"), py::arg("T"));
  m.def(
      "instantaneous_reward",
      [](const PopulationModel& p, const std::string& rw, const std::string& s0, double T) {
        return instantaneous_reward(p, reward(p, rw), state(p, s0), T).value;
      },
      py::arg("model"), py::arg("reward"), py::arg("s0"), py::arg("T"));
  m.def(
      "steady_state_reward",
      [](const PopulationModel& p, const std::string& rw) { return steady_state_reward(p, reward(p, rw)).value; },
      py::arg("model"), py::arg("reward"));

  m.def(
      "simulate",
      [](const PopulationModel& p, int N, double t_max, std::size_t runs, std::uint64_t seed, std::vector<double> grid,
         std::string tag, std::size_t threads) {
        auto cfg = sim_config(N, t_max, runs, seed, std::move(grid), threads);
        py::gil_scoped_release release;
        EnsembleEstimate e;
        if (tag.empty()) {
          e = estimate_population(p, cfg);
        } else {
          cfg.tag_initial_state = tag;
          e = estimate_state_probs(p, cfg);
        }
        py::gil_scoped_acquire acquire;
        return estimate_dict(e);
      },
      py::arg("model"), py::arg("N"), py::arg("t_max"), py::arg("runs") = 1000, py::arg("seed") = 1,
      py::arg("grid") = std::vector<double>{}, py::arg("tag") = "", py::arg("threads") = 0,
      "SSA ensemble: population densities, or tagged-state probabilities when tag is set.");

  m.def(
      "uniformization",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& q, std::vector<double> p0, double T) {
        return uniformization_transient(to_matrix(q), p0, T);
      },
      py::arg("q"), py::arg("p0"), py::arg("T"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one fluidmc command; returns (exit code, stdout, stderr).");
}
