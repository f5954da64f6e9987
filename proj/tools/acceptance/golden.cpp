#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <sstream>

#include <unistd.h>

#include "acceptance.hpp"
#include "fluidmc/cli.hpp"
#include "fluidmc/fluid.hpp"
#include "fluidmc/io.hpp"
#include "fluidmc/parser.hpp"
#include "fluidmc/sim.hpp"
#include "fluidmc/validate.hpp"

namespace fluidmc::acceptance {

namespace {

namespace fs = std::filesystem;

enum class Oracle { ClosedForm, Uniformization, Statistical };

const char* to_string(Oracle o) {
  switch (o) {
    case Oracle::ClosedForm: return "closed-form";
    case Oracle::Uniformization: return "uniformization";
    case Oracle::Statistical: return "statistical";
  }
  return "?";
}

struct GoldenCase {
  std::string name;
  std::string model;
  std::string formula;
  std::string s0;
  Oracle oracle = Oracle::ClosedForm;
  /// Expected value; for statistical cases the expected relative error (0).
  double expected = 0.0;
  /// Absolute tolerance; for statistical cases the bound on the relative error.
  double tolerance = 0.0;
  /// Where the expected value comes from.
  std::string source;
};

std::vector<double> agent_transient(const fs::path& model, const std::string& s0, double T,
                                    const std::vector<bool>& absorbing = {}) {
  const auto m = load_model(model);
  AgentGenerator gen(m);
  if (!absorbing.empty()) gen = gen.with_absorbing(absorbing);
  // The toy generators do not depend on x.
  const Matrix q = gen(m.init_density);
  std::vector<double> p0(m.n_states(), 0.0);
  p0[m.state_index(s0)] = 1.0;
  return uniformization_transient(q, p0, T);
}

std::vector<GoldenCase> cases(const fs::path& models) {
  const double e = std::exp(1.0);
  const auto asym = models / "two_state_asym.fmc";
  const auto occ = agent_transient(asym, "on", 0.7);
  const auto reach = agent_transient(asym, "on", 2.0, {false, true});
  const auto statistical = "fluid vs 1000 SSA runs at N = 300, relative error at T = 1000";
  return {
      {"two_state_until", "two_state.fmc", "P=? [ at_on U[0,1] at_off ]", "on", Oracle::ClosedForm, 1 - 1 / e, 1e-7,
       "1 - exp(-1)"},
      {"two_state_next", "two_state.fmc", "P=? [ X[0,1] at_off ]", "on", Oracle::ClosedForm, 1 - 1 / e, 1e-7,
       "1 - exp(-1)"},
      {"two_state_instantaneous", "two_state.fmc", "R{occ}=? [ I=1 ]", "on", Oracle::ClosedForm,
       (1 + std::exp(-2.0)) / 2, 1e-7, "(1 + exp(-2)) / 2"},
      {"two_state_cumulative_1", "two_state.fmc", "R{flips}=? [ C<=1 ]", "on", Oracle::ClosedForm,
       0.5 + (1 - std::exp(-2.0)) / 4, 1e-6, "T/2 + (1 - exp(-2T))/4 at T = 1"},
      {"two_state_cumulative_5", "two_state.fmc", "R{flips}=? [ C<=5 ]", "on", Oracle::ClosedForm,
       2.5 + (1 - std::exp(-10.0)) / 4, 1e-6, "T/2 + (1 - exp(-2T))/4 at T = 5"},
      {"two_state_steady", "two_state.fmc", "R{occ}=? [ S ]", "on", Oracle::ClosedForm, 0.5, 1e-9,
       "k2 / (k1 + k2) with k1 = k2 = 1"},
      {"asym_steady", "two_state_asym.fmc", "R{occ}=? [ S ]", "on", Oracle::ClosedForm, 1.0 / 3.0, 1e-9,
       "k2 / (k1 + k2) with k1 = 2, k2 = 1"},
      {"asym_zero_reward", "two_state_asym.fmc", "R{zero}=? [ C<=3 ]", "off", Oracle::ClosedForm, 0.0, 1e-12,
       "all-zero reward structure"},
      {"asym_instantaneous", "two_state_asym.fmc", "R{occ}=? [ I=0.7 ]", "on", Oracle::Uniformization, occ[0], 1e-7,
       "uniformization of the single-agent generator"},
      {"asym_until", "two_state_asym.fmc", "P=? [ true U[0,2] at_off ]", "on", Oracle::Uniformization, reach[1],
       1e-7, "uniformization with off absorbing"},
      {"bike_phi1", "bike.fmc", "R{cost}=? [ C<=1000 ]", "a", Oracle::Statistical, 0.0, 0.05, statistical},
      {"bike_phi2", "bike.fmc", "R{diss}=? [ I=1000 ]", "a", Oracle::Statistical, 0.0, 0.05, statistical},
  };
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("fluidmc-golden-" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

int cli(const std::vector<std::string>& args, std::string& log) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  log = err.str();
  return code;
}

Outcome run_case(const GoldenCase& c, const fs::path& models, const Workspace& ws, std::uint64_t seed) {
  Outcome o;
  o.id = c.name;
  o.title = std::string(to_string(c.oracle)) + ": " + c.formula;
  const fs::path formulas = ws.dir / (c.name + ".csl");
  write_text_file(formulas, c.formula + "\n");
  const fs::path out = ws.dir / (c.name + ".csv");
  const std::string model = (models / c.model).string();
  std::string log;
  char buf[256];
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.oracle == Oracle::Statistical) {
      const fs::path summary = ws.dir / (c.name + ".summary.csv");
      const int code = cli({"compare", model, formulas.string(), "--s0", c.s0, "--N", "300", "--runs", "1000",
                            "--seed", std::to_string(seed), "--grid", "10", "--out", out.string(), "--summary",
                            summary.string()},
                           log);
      if (code != kExitOk) throw std::runtime_error("exit code " + std::to_string(code) + ": " + log);
      const auto t = read_csv(summary);
      const double rel = t.numeric(t.column("rel_err_final")).at(0);
      o.pass = std::abs(rel - c.expected) <= c.tolerance;
      std::snprintf(buf, sizeof buf, "relative error %.4g, bound %.4g", rel, c.tolerance);
    } else {
      const int code =
          cli({"check", model, formulas.string(), "--s0", c.s0, "--out", out.string()}, log);
      if (code != kExitOk) throw std::runtime_error("exit code " + std::to_string(code) + ": " + log);
      const auto t = read_csv(out);
      const double got = t.numeric(t.column("value")).at(0);
      const double diff = std::abs(got - c.expected);
      o.pass = diff <= c.tolerance;
      std::snprintf(buf, sizeof buf, "expected %.12g, got %.12g, diff %.3g, tolerance %.3g", c.expected, got, diff,
                    c.tolerance);
    }
    o.detail = std::string(buf) + " [" + c.source + "]";
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = e.what();
  }
  return o;
}

}  // namespace

std::vector<Outcome> run_golden(const Context& ctx) {
  const Workspace ws;
  std::vector<Outcome> out;
  auto report = [&](Outcome o) {
    ctx.log << "golden " << o.id << " (" << o.title << "): " << (o.pass ? "PASS" : "FAIL") << "\n  " << o.detail
            << "\n"
            << std::flush;
    out.push_back(std::move(o));
  };

  {
    Outcome assets{"assets", "model assets parse with zero diagnostics", true, "", 0.0};
    for (const char* name : {"bike", "sir", "two_state", "two_state_asym"}) {
      const fs::path path = ctx.models / (std::string(name) + ".fmc");
      std::string log;
      const int code = cli({"validate", path.string()}, log);
      std::ostringstream os;
      os << name << ": " << validate(load_model(path)).size() << " diagnostics";
      assets.pass &= code == kExitOk && validate(load_model(path)).empty();
      assets.detail += (assets.detail.empty() ? "" : "; ") + os.str();
    }
    report(std::move(assets));
  }

  // Cases are independent; run them concurrently and report in order.
  const auto all = cases(ctx.models);
  std::vector<std::future<Outcome>> pending;
  for (const auto& c : all)
    pending.push_back(std::async(std::launch::async, [&, c] { return run_case(c, ctx.models, ws, ctx.seed); }));
  for (auto& f : pending) report(f.get());

  // Harness self-test: a corrupted expected value must be reported as a failure.
  GoldenCase corrupted = all.front();
  corrupted.name = "self_test_corrupted";
  corrupted.expected += 0.01;
  const Outcome bad = run_case(corrupted, ctx.models, ws, ctx.seed);
  Outcome self{"self_test", "corrupted expected value is rejected", !bad.pass, "diff report: " + bad.detail, 0.0};
  report(self);
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string junit_xml(const std::string& suite, const std::vector<Outcome>& outcomes) {
  std::size_t failures = 0;
  double total = 0.0;
  for (const auto& o : outcomes) {
    failures += !o.pass;
    total += o.seconds;
  }
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<testsuite name=\"" << xml_escape(suite) << "\" tests=\"" << outcomes.size() << "\" failures=\"" << failures
     << "\" time=\"" << total << "\">\n";
  for (const auto& o : outcomes) {
    os << "  <testcase classname=\"" << xml_escape(suite) << "\" name=\"" << xml_escape(o.id + " " + o.title)
       << "\" time=\"" << o.seconds << "\">\n";
    if (!o.pass) os << "    <failure message=\"" << xml_escape(o.detail) << "\"/>\n";
    else os << "    <system-out>" << xml_escape(o.detail) << "</system-out>\n";
    os << "  </testcase>\n";
  }
  os << "</testsuite>\n";
  return os.str();
}

}  // namespace fluidmc::acceptance
