#include "fluidmc/validate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fluidmc {

namespace {

double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

std::string point(const std::vector<double>& x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace

std::string to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

std::vector<std::vector<double>> simplex_samples(std::size_t n, std::size_t count) {
  static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                        43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
  std::vector<std::vector<double>> out;
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<double> x(n, 0.0);
    x[v] = 1.0;
    out.push_back(std::move(x));
  }
  if (n == 1) return out;
  std::vector<double> u(n - 1);
  for (std::size_t k = 1; k <= count; ++k) {
    for (std::size_t d = 0; d + 1 < n; ++d) {
      const unsigned base = primes[d % std::size(primes)];
      // Dimensions beyond the prime table reuse bases with a scrambled index.
      u[d] = radical_inverse(k + 7919 * (d / std::size(primes)), base);
    }
    std::sort(u.begin(), u.end());
    std::vector<double> x(n);
    double prev = 0.0;
    for (std::size_t d = 0; d + 1 < n; ++d) {
      x[d] = u[d] - prev;
      prev = u[d];
    }
    x[n - 1] = 1.0 - prev;
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Diagnostic> validate(const PopulationModel& m) {
  std::vector<Diagnostic> out;
  const auto samples = simplex_samples(m.n_states(), 1000);
  const auto& defs = m.def_bodies;

  for (const auto& t : m.transitions) {
    const CompiledExpr f(t.rate, m.param_values, defs);
    bool reported_neg = false;
    bool reported_nan = false;
    for (const auto& x : samples) {
      const double v = f(x);
      if (!std::isfinite(v) && !reported_nan) {
        out.push_back({Severity::Error, "NonFiniteRate",
                       "transition '" + t.name + "': rate is not finite at x=" + point(x)});
        reported_nan = true;
      } else if (v < -kNegativeRateTolerance && !reported_neg) {
        out.push_back({Severity::Error, "NegativeRate",
                       "transition '" + t.name + "': rate " + std::to_string(v) + " at x=" + point(x)});
        reported_neg = true;
      }
    }

    for (const Rule& r : t.rules) {
      const std::string where = "transition '" + t.name + "', rule " + m.agent.name(r.from) + " -> " +
                                m.agent.name(r.to);
      if (r.multiplicity > 1) {
        out.push_back({Severity::Warning, "MultiplicityUnsupportedForAgent",
                       where + ": multiplicity " + std::to_string(r.multiplicity) +
                           " is not supported by tagged-agent analysis"});
      }
      if (r.percap) {
        const CompiledExpr g(*r.percap, m.param_values, defs);
        bool bad = false;
        bool mismatch = false;
        for (const auto& x : samples) {
          const double gv = g(x);
          if ((!std::isfinite(gv) || gv < -kNegativeRateTolerance) && !bad) {
            out.push_back({Severity::Error, "InvalidPerCapitaRate",
                           where + ": per-capita rate " + std::to_string(gv) + " at x=" + point(x)});
            bad = true;
          }
          const double fv = f(x);
          if (std::isfinite(gv) && std::isfinite(fv) && !mismatch &&
              std::abs(x[r.from] * gv - fv) > 1e-9 * std::max(1.0, std::abs(fv))) {
            out.push_back({Severity::Warning, "PerCapitaMismatch",
                           where + ": x_" + m.agent.name(r.from) + " * percap differs from rate at x=" +
                               point(x)});
            mismatch = true;
          }
        }
      } else if (!has_density_factor(t.rate, r.from, defs)) {
        out.push_back({Severity::Warning, "MissingPerCapitaForm",
                       where + ": rate has no x_" + m.agent.name(r.from) +
                           " factor and no percap; agent share uses rate / max(x, 1e-9)"});
      }
    }
  }
  return out;
}

}  // namespace fluidmc
