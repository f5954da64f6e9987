#pragma once

#include <string>
#include <vector>

#include "fluidmc/model.hpp"

namespace fluidmc {

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Warning;
  /// Stable machine-readable code, e.g. "NegativeRate", "MissingPerCapitaForm".
  std::string code;
  std::string message;
};

/// Static and sampled checks of a parsed model:
///  - rates (and per-capita forms) evaluated at the simplex vertices and 1000
///    Halton points must be finite and >= -1e-12;
///  - rules without `percap` whose rate has no symbolic x_<source> factor;
///  - rules with multiplicity > 1 (tagged-agent analysis unsupported);
///  - declared per-capita forms that disagree with rate / x_source.
std::vector<Diagnostic> validate(const PopulationModel& m);

/// Quasi-random points on the unit simplex (vertices first, then Halton).
std::vector<std::vector<double>> simplex_samples(std::size_t n_states, std::size_t count);

std::string to_string(Severity s);

}  // namespace fluidmc
