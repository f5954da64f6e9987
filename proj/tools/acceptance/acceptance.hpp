#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace fluidmc::acceptance {

struct Outcome {
  std::string id;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Context {
  std::filesystem::path models;
  std::uint64_t seed = 20240501;
  std::ostream& log;
  /// Criterion numbers to run; empty runs all.
  std::set<int> only = {};
};

std::vector<Outcome> run_criteria(const Context& ctx);
std::vector<Outcome> run_golden(const Context& ctx);

std::string junit_xml(const std::string& suite, const std::vector<Outcome>& outcomes);

/// |a - b| / |b|, 0 when both are 0.
double relative_error(double a, double b);

}  // namespace fluidmc::acceptance
