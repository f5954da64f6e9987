#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "fluidmc/model.hpp"

namespace fluidmc {

/// Parses the line-oriented model DSL (states, params, defs, transitions,
/// init, labels and reward blocks). All identifiers are resolved and the
/// model invariants are checked before returning.
PopulationModel parse_model(std::string_view text);

PopulationModel load_model(const std::filesystem::path& path);

/// Canonical DSL text; parse_model(print_model(m)) == m.
std::string print_model(const PopulationModel& m);

std::string read_text_file(const std::filesystem::path& path);

namespace detail {
class TokenStream;
/// Expression grammar shared with the formula parser.
Expr parse_expression(TokenStream& ts, const PopulationModel& scope);
double parse_constant(TokenStream& ts, const PopulationModel& scope);
}  // namespace detail

}  // namespace fluidmc
